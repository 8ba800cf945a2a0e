use std::collections::VecDeque;

use super::{BoundingBox, Mask, Pixel};

/// One 8-connected foreground component, stored as a full-size mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub mask: Mask,
    pub bbox: BoundingBox,
    pub area: usize,
}

const NEIGHBORS_8: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Labels 8-connected components, drops those smaller than `min_area` and
/// orders the rest by bounding-box left edge, then top edge.
pub fn connected_components(m: &Mask, min_area: usize) -> Vec<Component> {
    let (w, h) = (m.width(), m.height());
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();

    for start in 0..w * h {
        if !m.bits()[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut members = Vec::new();
        while let Some(i) = queue.pop_front() {
            members.push(i);
            let (r, c) = ((i / w) as isize, (i % w) as isize);
            for (dr, dc) in NEIGHBORS_8 {
                let (nr, nc) = (r + dr, c + dc);
                if m.get_signed(nr, nc) {
                    let j = nr as usize * w + nc as usize;
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        if members.len() < min_area {
            continue;
        }
        let mut mask = Mask::new(w, h);
        let first = Pixel::new(members[0] / w, members[0] % w);
        let mut bbox = BoundingBox {
            top: first.row,
            left: first.col,
            bottom: first.row,
            right: first.col,
        };
        for &i in &members {
            let (r, c) = (i / w, i % w);
            mask.set(r, c, true);
            bbox.top = bbox.top.min(r);
            bbox.bottom = bbox.bottom.max(r);
            bbox.left = bbox.left.min(c);
            bbox.right = bbox.right.max(c);
        }
        out.push(Component {
            mask,
            bbox,
            area: members.len(),
        });
    }
    out.sort_by_key(|c| (c.bbox.left, c.bbox.top));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn block(m: &mut Mask, top: usize, left: usize, h: usize, w: usize) {
        for r in top..top + h {
            for c in left..left + w {
                m.set(r, c, true);
            }
        }
    }

    #[test]
    fn empty_mask_has_no_components() {
        assert!(connected_components(&Mask::new(8, 8), 0).is_empty());
    }

    #[test]
    fn two_blocks_ordered_left_to_right() {
        let mut m = Mask::new(40, 20);
        block(&mut m, 2, 25, 10, 10);
        block(&mut m, 5, 2, 10, 10);
        let comps = connected_components(&m, 50);
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].bbox.left, 2);
        assert_eq!(comps[1].bbox.left, 25);
        assert_eq!(comps[0].area, 100);
    }

    #[test]
    fn small_block_filtered() {
        let mut m = Mask::new(20, 20);
        block(&mut m, 0, 0, 5, 6);
        assert!(connected_components(&m, 50).is_empty());
    }

    #[test]
    fn diagonal_pixels_join() {
        let mut m = Mask::new(5, 5);
        m.set(0, 0, true);
        m.set(1, 1, true);
        m.set(2, 2, true);
        assert_eq!(connected_components(&m, 1).len(), 1);
    }

    proptest! {
        #[test]
        fn components_partition_foreground(
            bits in proptest::collection::vec(any::<bool>(), 12 * 10),
            min_area in 0usize..6,
        ) {
            let m = Mask::from_bits(12, 10, bits).unwrap();
            let all = connected_components(&m, 0);
            let kept = connected_components(&m, min_area);
            let mut union = vec![0u32; 120];
            for c in &all {
                for p in c.mask.pixels() {
                    union[p.row * 12 + p.col] += 1;
                }
            }
            for (i, &b) in m.bits().iter().enumerate() {
                prop_assert_eq!(union[i], u32::from(b));
            }
            let dropped: usize = all.iter().filter(|c| c.area < min_area).map(|c| c.area).sum();
            let kept_area: usize = kept.iter().map(|c| c.area).sum();
            prop_assert_eq!(kept_area + dropped, m.count());
            for w in kept.windows(2) {
                prop_assert!((w[0].bbox.left, w[0].bbox.top) <= (w[1].bbox.left, w[1].bbox.top));
            }
        }
    }
}
