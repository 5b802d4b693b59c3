use ndarray::Array2;
use rand::distr::{Distribution, Open01};

use crate::{Error, Result, Rng};

/// Glorot/Xavier uniform initialization: entries drawn from `U(-L, L)` with
/// `L = sqrt(6 / (fan_in + fan_out))`. The interval is open at both ends.
pub fn xavier_init(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Result<Array2<f64>> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::invalid(format!(
            "xavier_init needs non-zero fans, got {fan_in}x{fan_out}"
        )));
    }
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Ok(Array2::from_shape_simple_fn((fan_in, fan_out), || {
        let u: f64 = Open01.sample(rng);
        limit * (2.0 * u - 1.0)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    #[test]
    fn square_fans_are_bounded_by_one() {
        let w = xavier_init(3, 3, &mut seeded_rng(1, 0)).unwrap();
        assert_eq!(w.dim(), (3, 3));
        assert!(w.iter().all(|v| (-1.0..1.0).contains(v)));
    }

    #[test]
    fn one_by_five_bounded_by_one() {
        let w = xavier_init(1, 5, &mut seeded_rng(2, 0)).unwrap();
        assert!(w.iter().all(|v| (-1.0..1.0).contains(v)));
    }

    #[test]
    fn same_seed_same_matrix() {
        let a = xavier_init(7, 4, &mut seeded_rng(99, 0)).unwrap();
        let b = xavier_init(7, 4, &mut seeded_rng(99, 0)).unwrap();
        let bits = |m: &Array2<f64>| m.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn zero_fan_is_rejected() {
        assert!(matches!(
            xavier_init(0, 4, &mut seeded_rng(0, 0)),
            Err(Error::InvalidArgument(_))
        ));
        assert!(xavier_init(4, 0, &mut seeded_rng(0, 0)).is_err());
    }
}
