//! Dense n-dimensional `f64` arrays, row-major, immutable in all operations.
//!
//! This is the carrier type for images, feature maps, parameters, and
//! gradients. Broadcasting is limited to tensor-scalar on purpose: explicit
//! shapes catch bugs in hand-written backprop code. Matrix products accumulate
//! in row-major index order so results are bit-reproducible.

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() {
        return Err(Error::InvalidShape(
            "shape must have at least one dimension (a scalar is shape [1])".into(),
        ));
    }
    if shape.iter().any(|&d| d == 0) {
        return Err(Error::InvalidShape(format!(
            "all dimensions must be >= 1, got {shape:?}"
        )));
    }
    Ok(())
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Result<Tensor> {
        Tensor::full(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Result<Tensor> {
        Tensor::full(shape, 1.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Result<Tensor> {
        check_shape(shape)?;
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("fill value {value}")));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        })
    }

    /// Seeded uniform fill over [lo, hi); identical seed gives identical bits.
    pub fn seeded_uniform(shape: &[usize], lo: f64, hi: f64, seed: u64) -> Result<Tensor> {
        check_shape(shape)?;
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::NonFinite(format!("uniform bounds [{lo}, {hi})")));
        }
        let mut rng = Rng::new(seed);
        let n = shape.iter().product();
        let data = (0..n).map(|_| rng.uniform(lo, hi)).collect();
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        check_shape(shape)?;
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::InvalidShape(format!(
                "shape {shape:?} requires {expected} elements, got {}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("element {bad}")));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Construction that skips the finiteness scan; callers guarantee shape
    /// consistency. Used on hot paths inside the crate.
    pub(crate) fn from_raw(shape: Vec<usize>, data: Vec<f64>) -> Tensor {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn dim(&self, axis: usize) -> usize {
        self.shape[axis]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn zip_with(&self, rhs: &Tensor, op: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != rhs.shape {
            return Err(Error::ShapeMismatch(format!(
                "elementwise op on {:?} vs {:?}",
                self.shape, rhs.shape
            )));
        }
        let data: Vec<f64> = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(&a, &b)| op(a, b))
            .collect();
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("elementwise result {bad}")));
        }
        Ok(Tensor::from_raw(self.shape.clone(), data))
    }

    fn map_scalar(&self, s: f64, op: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let data: Vec<f64> = self.data.iter().map(|&a| op(a, s)).collect();
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("elementwise result {bad}")));
        }
        Ok(Tensor::from_raw(self.shape.clone(), data))
    }

    pub fn add(&self, rhs: &Tensor) -> Result<Tensor> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Tensor) -> Result<Tensor> {
        self.zip_with(rhs, |a, b| a - b)
    }

    pub fn mul(&self, rhs: &Tensor) -> Result<Tensor> {
        self.zip_with(rhs, |a, b| a * b)
    }

    pub fn add_scalar(&self, s: f64) -> Result<Tensor> {
        self.map_scalar(s, |a, b| a + b)
    }

    pub fn sub_scalar(&self, s: f64) -> Result<Tensor> {
        self.map_scalar(s, |a, b| a - b)
    }

    pub fn mul_scalar(&self, s: f64) -> Result<Tensor> {
        self.map_scalar(s, |a, b| a * b)
    }

    /// Matrix product of two 2-D tensors.
    pub fn matmul(&self, rhs: &Tensor) -> Result<Tensor> {
        if self.rank() != 2 || rhs.rank() != 2 {
            return Err(Error::ShapeMismatch(format!(
                "matmul needs 2-D operands, got {:?} and {:?}",
                self.shape, rhs.shape
            )));
        }
        let (m, k) = (self.shape[0], self.shape[1]);
        let (k2, n) = (rhs.shape[0], rhs.shape[1]);
        if k != k2 {
            return Err(Error::ShapeMismatch(format!(
                "matmul inner dims: {:?} vs {:?}",
                self.shape, rhs.shape
            )));
        }
        let mut out = vec![0.0; m * n];
        matmul_into(&self.data, &rhs.data, m, k, n, &mut out);
        if let Some(bad) = out.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("matmul result {bad}")));
        }
        Ok(Tensor::from_raw(vec![m, n], out))
    }

    pub fn reshape(&self, new_shape: &[usize]) -> Result<Tensor> {
        check_shape(new_shape)?;
        let expected: usize = new_shape.iter().product();
        if expected != self.data.len() {
            return Err(Error::InvalidShape(format!(
                "cannot reshape {:?} ({} elements) to {new_shape:?} ({expected} elements)",
                self.shape,
                self.data.len()
            )));
        }
        Ok(Tensor::from_raw(new_shape.to_vec(), self.data.clone()))
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// True when both tensors have identical shapes and bit-identical data.
    pub fn bits_eq(&self, rhs: &Tensor) -> bool {
        self.shape == rhs.shape
            && self
                .data
                .iter()
                .zip(&rhs.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// `out[m x n] = a[m x k] * b[k x n]`, all row-major slices.
///
/// For each output element the k-sum accumulates in increasing index order, so
/// the result is bit-identical across runs and platforms.
pub(crate) fn matmul_into(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    out.fill(0.0);
    for i in 0..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        for kk in 0..k {
            let aik = a[i * k + kk];
            if aik == 0.0 {
                continue;
            }
            let b_row = &b[kk * n..(kk + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += aik * bv;
            }
        }
    }
}

/// `out[m x k] = a[m x n] * b^T` where `b` is `k x n` row-major.
/// Each output element is a dot product of two contiguous rows.
pub(crate) fn matmul_abt_into(a: &[f64], b: &[f64], m: usize, n: usize, k: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * k);
    for i in 0..m {
        let a_row = &a[i * n..(i + 1) * n];
        for j in 0..k {
            let b_row = &b[j * n..(j + 1) * n];
            let mut acc = 0.0;
            for (&av, &bv) in a_row.iter().zip(b_row) {
                acc += av * bv;
            }
            out[i * k + j] = acc;
        }
    }
}

/// `out[m x n] = a^T * b` where `a` is `k x m` and `b` is `k x n`, row-major.
/// Accumulates over `k` in increasing order for every output element.
pub(crate) fn matmul_atb_into(a: &[f64], b: &[f64], k: usize, m: usize, n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    out.fill(0.0);
    for r in 0..k {
        let b_row = &b[r * n..(r + 1) * n];
        for i in 0..m {
            let ari = a[r * m + i];
            if ari == 0.0 {
                continue;
            }
            let out_row = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += ari * bv;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent naive oracle: j-innermost with a local accumulator.
    fn matmul_oracle(a: &Tensor, b: &Tensor) -> Tensor {
        let (m, k) = (a.shape()[0], a.shape()[1]);
        let n = b.shape()[1];
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut acc = 0.0;
                for kk in 0..k {
                    acc += a.data()[i * k + kk] * b.data()[kk * n + j];
                }
                out[i * n + j] = acc;
            }
        }
        Tensor::from_vec(&[m, n], out).unwrap()
    }

    fn identity(n: usize) -> Tensor {
        let mut t = Tensor::zeros(&[n, n]).unwrap();
        for i in 0..n {
            t.data_mut()[i * n + i] = 1.0;
        }
        t
    }

    #[test]
    fn construct_zeros_and_ones() {
        let z = Tensor::zeros(&[2, 2]).unwrap();
        assert_eq!(z.data(), &[0.0, 0.0, 0.0, 0.0]);
        let o = Tensor::ones(&[3]).unwrap();
        assert_eq!(o.data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn construct_seeded_uniform_is_deterministic() {
        let a = Tensor::seeded_uniform(&[2], 0.0, 1.0, 42).unwrap();
        let b = Tensor::seeded_uniform(&[2], 0.0, 1.0, 42).unwrap();
        assert!(a.bits_eq(&b));
        assert!(a.data().iter().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn construct_rejects_bad_shapes() {
        assert!(matches!(
            Tensor::zeros(&[]),
            Err(Error::InvalidShape(_))
        ));
        assert!(matches!(
            Tensor::zeros(&[2, 0]),
            Err(Error::InvalidShape(_))
        ));
    }

    #[test]
    fn construct_rejects_non_finite() {
        assert!(matches!(
            Tensor::full(&[2], f64::NAN),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            Tensor::from_vec(&[2], vec![1.0, f64::INFINITY]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn elementwise_add() {
        let a = Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap();
        let b = Tensor::from_vec(&[2], vec![3.0, 4.0]).unwrap();
        assert_eq!(a.add(&b).unwrap().data(), &[4.0, 6.0]);
    }

    #[test]
    fn elementwise_scalar_zero_and_self_sub() {
        let a = Tensor::seeded_uniform(&[3, 2], -1.0, 1.0, 5).unwrap();
        assert!(a.mul_scalar(0.0).unwrap().data().iter().all(|&v| v == 0.0));
        assert!(a.sub(&a).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn elementwise_shape_mismatch() {
        let a = Tensor::zeros(&[2]).unwrap();
        let b = Tensor::zeros(&[3]).unwrap();
        assert!(matches!(a.add(&b), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn matmul_identity_is_exact() {
        let b = Tensor::from_vec(&[2, 2], vec![5.0, 6.0, 7.0, 8.0]).unwrap();
        let out = identity(2).matmul(&b).unwrap();
        assert!(out.bits_eq(&b));
    }

    #[test]
    fn matmul_hand_case() {
        let a = Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::from_vec(&[2, 2], vec![5.0, 6.0, 7.0, 8.0]).unwrap();
        // Frozen from the triple-loop oracle.
        assert_eq!(a.matmul(&b).unwrap().data(), &[19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn matmul_zero_case() {
        let a = Tensor::seeded_uniform(&[3, 4], -1.0, 1.0, 1).unwrap();
        let z = Tensor::zeros(&[4, 2]).unwrap();
        assert!(a.matmul(&z).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matmul_dimension_mismatch() {
        let a = Tensor::zeros(&[2, 3]).unwrap();
        let b = Tensor::zeros(&[2, 2]).unwrap();
        assert!(matches!(a.matmul(&b), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn matmul_matches_oracle_exactly_on_integers() {
        let mut rng = crate::rng::Rng::new(11);
        for _ in 0..20 {
            let m = 1 + rng.next_below(8);
            let k = 1 + rng.next_below(8);
            let n = 1 + rng.next_below(8);
            let ints = |rng: &mut crate::rng::Rng, len: usize| {
                (0..len)
                    .map(|_| (rng.next_below(11) as f64) - 5.0)
                    .collect::<Vec<_>>()
            };
            let a = Tensor::from_vec(&[m, k], ints(&mut rng, m * k)).unwrap();
            let b = Tensor::from_vec(&[k, n], ints(&mut rng, k * n)).unwrap();
            // 0 ULP on integer-valued inputs.
            assert!(a.matmul(&b).unwrap().bits_eq(&matmul_oracle(&a, &b)));
        }
    }

    #[test]
    fn matmul_matches_oracle_on_random_reals() {
        for seed in 0..5u64 {
            let a = Tensor::seeded_uniform(&[64, 64], -1.0, 1.0, seed * 2 + 1).unwrap();
            let b = Tensor::seeded_uniform(&[64, 64], -1.0, 1.0, seed * 2 + 2).unwrap();
            let got = a.matmul(&b).unwrap();
            let want = matmul_oracle(&a, &b);
            for (g, w) in got.data().iter().zip(want.data()) {
                let rel = (g - w).abs() / w.abs().max(1.0);
                assert!(rel < 1e-12, "got {g}, want {w}");
            }
        }
    }

    #[test]
    fn reshape_row_major_order() {
        let a = Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let flat = a.reshape(&[4]).unwrap();
        assert_eq!(flat.data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn reshape_count_mismatch() {
        let a = Tensor::zeros(&[4]).unwrap();
        assert!(matches!(a.reshape(&[3]), Err(Error::InvalidShape(_))));
    }

    #[test]
    fn operations_do_not_mutate_inputs() {
        let a = Tensor::seeded_uniform(&[4, 4], -1.0, 1.0, 3).unwrap();
        let b = Tensor::seeded_uniform(&[4, 4], -1.0, 1.0, 4).unwrap();
        let (a0, b0) = (a.clone(), b.clone());
        let _ = a.add(&b).unwrap();
        let _ = a.matmul(&b).unwrap();
        let _ = a.reshape(&[16]).unwrap();
        assert!(a.bits_eq(&a0) && b.bits_eq(&b0));
    }

    proptest! {
        #[test]
        fn prop_matmul_identity(m in 1usize..6, n in 1usize..6, seed in 0u64..50) {
            let a = Tensor::seeded_uniform(&[m, n], -10.0, 10.0, seed).unwrap();
            prop_assert!(a.matmul(&identity(n)).unwrap().bits_eq(&a));
        }

        #[test]
        fn prop_reshape_roundtrip(dims in proptest::collection::vec(1usize..5, 1..4), seed in 0u64..50) {
            let a = Tensor::seeded_uniform(&dims, -1.0, 1.0, seed).unwrap();
            let flat_len = a.len();
            let back = a.reshape(&[flat_len]).unwrap().reshape(&dims).unwrap();
            prop_assert!(back.bits_eq(&a));
        }
    }
}
