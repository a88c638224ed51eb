use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Scalar, Tensor};

/// He-scaled normal truncated at two standard deviations, std `sqrt(2 / fan_in)`.
pub fn he_normal<T: Scalar>(shape: &[usize], fan_in: usize, rng: &mut impl Rng) -> Tensor<T> {
    let std = (2.0 / fan_in.max(1) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| loop {
            let z: f64 = StandardNormal.sample(rng);
            if z.abs() <= 2.0 {
                break T::lit(z * std);
            }
        })
        .collect();
    Tensor::from_vec(shape, data).expect("init shape")
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn truncated_and_scaled() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t: Tensor<f64> = he_normal(&[3, 3, 16, 32], 144, &mut rng);
        let std = (2.0f64 / 144.0).sqrt();
        assert!(t.data().iter().all(|v| v.abs() <= 2.0 * std));
        let var = t.sum_squares() / t.len() as f64;
        // variance of a standard normal truncated at ±2 is about 0.774
        assert!((var / (std * std) - 0.774).abs() < 0.05);
    }
}
