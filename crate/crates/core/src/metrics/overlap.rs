use crate::error::{Error, Result};
use crate::raster::Mask;

fn counts(a: &Mask, b: &Mask) -> Result<(usize, usize, usize)> {
    if !a.same_dims(b) {
        return Err(Error::input(format!(
            "mask sizes differ: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let (mut inter, mut na, mut nb) = (0, 0, 0);
    for (&x, &y) in a.bits().iter().zip(b.bits()) {
        inter += (x && y) as usize;
        na += x as usize;
        nb += y as usize;
    }
    Ok((inter, na, nb))
}

/// `2|A∩B| / (|A| + |B|)`, 1 when both masks are empty.
pub fn dice(a: &Mask, b: &Mask) -> Result<f64> {
    let (i, na, nb) = counts(a, b)?;
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * i as f64 / (na + nb) as f64)
}

/// `|A∩B| / |A∪B|`, 1 when both masks are empty.
pub fn jaccard(a: &Mask, b: &Mask) -> Result<f64> {
    let (i, na, nb) = counts(a, b)?;
    let union = na + nb - i;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(i as f64 / union as f64)
}

/// Fraction of pixels on which the masks agree.
pub fn pixel_accuracy(a: &Mask, b: &Mask) -> Result<f64> {
    let (i, na, nb) = counts(a, b)?;
    let total = a.bits().len();
    if total == 0 {
        return Ok(1.0);
    }
    let disagree = na + nb - 2 * i;
    Ok((total - disagree) as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(bits: &[u8]) -> Mask {
        Mask::from_bits(bits.len(), 1, bits.iter().map(|&b| b == 1).collect()).unwrap()
    }

    #[test]
    fn hand_values() {
        let a = m(&[1, 1, 1, 1, 0, 0]);
        let b = m(&[0, 0, 1, 1, 1, 1]);
        assert_eq!(dice(&a, &b).unwrap(), 0.5);
        assert_eq!(jaccard(&a, &b).unwrap(), 1.0 / 3.0);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        assert_eq!(dice(&m(&[1, 0]), &m(&[0, 1])).unwrap(), 0.0);
        assert_eq!(pixel_accuracy(&m(&[1, 0]), &m(&[0, 1])).unwrap(), 0.0);
    }

    #[test]
    fn both_empty() {
        let e = m(&[0, 0, 0]);
        assert_eq!(dice(&e, &e).unwrap(), 1.0);
        assert_eq!(jaccard(&e, &e).unwrap(), 1.0);
    }

    #[test]
    fn seven_pixel_difference() {
        let a = Mask::from_fn(10, 10, |r, _| r < 5);
        let mut b = a.clone();
        for c in 0..7 {
            b.set(9, c, true);
        }
        assert!((pixel_accuracy(&a, &b).unwrap() - 0.93).abs() < 1e-12);
    }

    #[test]
    fn size_mismatch() {
        assert!(matches!(
            dice(&Mask::new(2, 2), &Mask::new(2, 3)),
            Err(Error::InvalidInput(_))
        ));
    }

    proptest! {
        #[test]
        fn symmetric_bounded_and_related(
            a in proptest::collection::vec(any::<bool>(), 40),
            b in proptest::collection::vec(any::<bool>(), 40),
        ) {
            let (a, b) = (Mask::from_bits(8, 5, a).unwrap(), Mask::from_bits(8, 5, b).unwrap());
            let d = dice(&a, &b).unwrap();
            let j = jaccard(&a, &b).unwrap();
            prop_assert_eq!(d, dice(&b, &a).unwrap());
            prop_assert_eq!(j, jaccard(&b, &a).unwrap());
            prop_assert!((0.0..=1.0).contains(&d) && (0.0..=1.0).contains(&j));
            prop_assert!((d - 2.0 * j / (1.0 + j)).abs() < 1e-12);
        }
    }
}
