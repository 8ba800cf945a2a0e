//! Mask primitives on a rendered phantom: smoothing, components, contour
//! tracing, CEJ polyline, instance extraction, overlay and heatmap.

use perio::phantom::{render, PhantomScene, PhantomToothSpec};
use perio::raster::{
    apply_heatmap, augment, binarize, connected_components, default_min_area, extract_tooth_instances,
    gaussian_smooth, overlay, resize, trace_cej_polyline, trace_contour, AugmentOp, GrayImage, Label,
};

fn main() -> perio::Result<()> {
    let scene = PhantomScene::new(
        200,
        160,
        vec![
            PhantomToothSpec::upright(60.0, 50.0, 30.0, 85.0).with_bone(10.0, 14.0),
            PhantomToothSpec::upright(140.0, 52.0, 36.0, 82.0).with_bone(24.0, 20.0),
        ],
    );
    let r = render(&scene)?;

    let gray = GrayImage::from_vec(
        r.tooth.width(),
        r.tooth.height(),
        r.tooth.bits().iter().map(|&b| f64::from(u8::from(b))).collect(),
    )?;
    let smooth = gaussian_smooth(&gray, 1.0)?;
    let tooth = binarize(&smooth, 0.5);
    println!("tooth pixels: raw {}, smoothed {}", r.tooth.count(), tooth.count());

    let comps = connected_components(&tooth, default_min_area(tooth.width(), tooth.height()));
    for (i, c) in comps.iter().enumerate() {
        let contour = trace_contour(&c.mask)?;
        println!("component {i}: area {}, contour {} px", c.area, contour.points.len());
    }

    let cej = trace_cej_polyline(&r.cej)?;
    println!("cej polyline: {} points", cej.points.len());

    for inst in extract_tooth_instances(&r.tooth, &r.bone, &r.cej, 100)? {
        let b = inst.bbox;
        println!("instance {}: rows {}..={} cols {}..={}", inst.id, b.top, b.bottom, b.left, b.right);
    }

    let labels = overlay(&r.tooth, &r.bone, &r.cej)?;
    println!("overlay: {} bone-only pixels", labels.mask_of(Label::Bone).count());

    let heat = apply_heatmap(&resize(&smooth, 100, 80)?);
    println!("heatmap at centre: {:?}", heat.get(40, 50));

    let flipped = augment(&smooth, &[AugmentOp::HFlip, AugmentOp::Rotate { degrees: 5.0 }], 3)?;
    println!("augmented mean intensity {:.4}", flipped.sum() / (flipped.width() * flipped.height()) as f64);
    Ok(())
}
