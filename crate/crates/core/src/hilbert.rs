//! Dense state vectors and local operators over heterogeneous qudit registers.
//!
//! Basis indices are row-major mixed-radix with site 0 the most significant
//! factor: for dims `[d0, d1, d2]` the level tuple `(l0, l1, l2)` sits at
//! `l0*d1*d2 + l1*d2 + l2`. The same convention is used for the matrices of
//! [`LocalOperator`], whose first listed site is the most significant.

use std::collections::HashSet;

use num_complex::Complex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::{self, CMatrix, Real};

/// Ordered list of named sites with their local dimensions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuditRegister {
    dims: Vec<usize>,
    labels: Vec<String>,
}

impl QuditRegister {
    pub fn new<S: Into<String>>(dims: Vec<usize>, labels: Vec<S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if dims.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: dims.len(), found: labels.len() });
        }
        if let Some(&d) = dims.iter().find(|&&d| d == 0) {
            return Err(Error::DimensionMismatch { expected: 1, found: d });
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::DuplicateSite(l.clone()));
            }
        }
        Ok(QuditRegister { dims, labels })
    }

    /// A register of one site.
    pub fn single(label: &str, dim: usize) -> Self {
        QuditRegister { dims: vec![dim], labels: vec![label.to_string()] }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownSite(label.to_string()))
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.dims[self.position(label)?])
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dims.len()];
        for i in (0..self.dims.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.dims[i + 1];
        }
        s
    }

    pub fn index_of(&self, levels: &[usize]) -> usize {
        debug_assert_eq!(levels.len(), self.dims.len());
        levels.iter().zip(&self.dims).fold(0, |acc, (&l, &d)| acc * d + l)
    }

    pub fn levels_of(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for i in (0..self.dims.len()).rev() {
            out[i] = index % self.dims[i];
            index /= self.dims[i];
        }
        out
    }

    /// `self` followed by `other`; fails on shared labels.
    pub fn concat(&self, other: &QuditRegister) -> Result<Self> {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        QuditRegister::new(dims, labels)
    }
}

/// Complex amplitudes over a [`QuditRegister`].
///
/// The `normalized` flag is set by constructors that verify the norm, by
/// [`StateVector::normalize`], and is carried through unitary operators.
/// Non-unitary operators clear it.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector<T: Real> {
    register: QuditRegister,
    amplitudes: Vec<Complex<T>>,
    normalized: bool,
}

fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

impl<T: Real> StateVector<T> {
    /// Wraps raw amplitudes; the normalized flag is computed from the norm.
    pub fn new(register: QuditRegister, amplitudes: Vec<Complex<T>>) -> Result<Self> {
        if amplitudes.len() != register.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: register.total_dim(),
                found: amplitudes.len(),
            });
        }
        let mut s = StateVector { register, amplitudes, normalized: false };
        s.normalized = (s.norm() - T::one()).abs() <= T::tolerance();
        Ok(s)
    }

    pub fn zeros(register: QuditRegister) -> Self {
        let n = register.total_dim();
        StateVector { register, amplitudes: vec![czero(); n], normalized: false }
    }

    /// Computational basis state.
    pub fn basis(register: QuditRegister, levels: &[usize]) -> Result<Self> {
        if levels.len() != register.len() {
            return Err(Error::DimensionMismatch { expected: register.len(), found: levels.len() });
        }
        for (&l, &d) in levels.iter().zip(register.dims()) {
            if l >= d {
                return Err(Error::DimensionMismatch { expected: d, found: l });
            }
        }
        let mut s = Self::zeros(register);
        let i = s.register.index_of(levels);
        s.amplitudes[i] = Complex::new(T::one(), T::zero());
        s.normalized = true;
        Ok(s)
    }

    /// A single-site state from its amplitudes.
    pub fn single(label: &str, amplitudes: Vec<Complex<T>>) -> Result<Self> {
        let reg = QuditRegister::single(label, amplitudes.len());
        Self::new(reg, amplitudes)
    }

    pub fn register(&self) -> &QuditRegister {
        &self.register
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amplitudes
    }

    pub fn amplitude(&self, levels: &[usize]) -> Complex<T> {
        self.amplitudes[self.register.index_of(levels)]
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm_sqr(&self) -> T {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    pub fn normalize(&self) -> Result<Self> {
        let n = self.norm();
        if n <= T::epsilon() {
            return Err(Error::Unnormalized);
        }
        let inv = T::one() / n;
        Ok(StateVector {
            register: self.register.clone(),
            amplitudes: self.amplitudes.iter().map(|z| z * inv).collect(),
            normalized: true,
        })
    }

    pub fn scaled(&self, factor: Complex<T>) -> Self {
        let norm_kept = self.normalized && (factor.norm() - T::one()).abs() <= T::tolerance();
        StateVector {
            register: self.register.clone(),
            amplitudes: self.amplitudes.iter().map(|z| z * factor).collect(),
            normalized: norm_kept,
        }
    }

    /// Elementwise sum; registers must match.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.register != other.register {
            return Err(Error::RegisterMismatch);
        }
        let amps = self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a + b).collect();
        Self::new(self.register.clone(), amps)
    }

    /// Kronecker product in the order given.
    pub fn tensor(states: &[&StateVector<T>]) -> Result<Self> {
        let mut iter = states.iter();
        let first = match iter.next() {
            Some(s) => (*s).clone(),
            None => return Err(Error::DimensionMismatch { expected: 1, found: 0 }),
        };
        iter.try_fold(first, |acc, s| acc.tensor_with(s))
    }

    pub fn tensor_with(&self, other: &Self) -> Result<Self> {
        let register = self.register.concat(&other.register)?;
        let mut amplitudes = Vec::with_capacity(register.total_dim());
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                amplitudes.push(a * b);
            }
        }
        Ok(StateVector {
            register,
            amplitudes,
            normalized: self.normalized && other.normalized,
        })
    }

    /// Applies `op` to its sites, leaving the others untouched.
    pub fn apply_local(&self, op: &LocalOperator<T>) -> Result<Self> {
        let positions = op
            .sites
            .iter()
            .map(|s| self.register.position(s))
            .collect::<Result<Vec<_>>>()?;
        for (p, &d) in positions.iter().zip(&op.site_dims) {
            let actual = self.register.dims()[*p];
            if actual != d {
                return Err(Error::DimensionMismatch { expected: actual, found: d });
            }
        }
        let strides = self.register.strides();
        let dims = self.register.dims();
        let local_dim = op.dim();
        // offset of each local basis index inside the full index
        let offsets: Vec<usize> = (0..local_dim)
            .map(|mut l| {
                let mut off = 0;
                for k in (0..positions.len()).rev() {
                    let d = op.site_dims[k];
                    off += (l % d) * strides[positions[k]];
                    l /= d;
                }
                off
            })
            .collect();
        let mut out = vec![czero(); self.amplitudes.len()];
        let mut buf = vec![czero(); local_dim];
        for base in 0..self.amplitudes.len() {
            if positions.iter().any(|&p| !(base / strides[p]).is_multiple_of(dims[p])) {
                continue;
            }
            for (l, off) in offsets.iter().enumerate() {
                buf[l] = self.amplitudes[base + off];
            }
            for (r, off) in offsets.iter().enumerate() {
                let mut acc = czero();
                for (cidx, b) in buf.iter().enumerate() {
                    acc = acc + op.matrix[[r, cidx]] * b;
                }
                out[base + off] = acc;
            }
        }
        Ok(StateVector {
            register: self.register.clone(),
            amplitudes: out,
            normalized: self.normalized && op.is_unitary(),
        })
    }

    /// Applies operators left to right (the first is applied first).
    pub fn apply_all<'a, I>(&self, ops: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a LocalOperator<T>>,
    {
        ops.into_iter().try_fold(self.clone(), |s, op| s.apply_local(op))
    }

    /// `⟨self|other⟩`, conjugate-linear in `self`.
    pub fn inner(&self, other: &Self) -> Result<Complex<T>> {
        if self.register != other.register {
            return Err(Error::RegisterMismatch);
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .fold(czero(), |acc, (a, b)| acc + a.conj() * b))
    }

    /// `|⟨a|b⟩|² / (‖a‖² ‖b‖²)`.
    pub fn fidelity(&self, other: &Self) -> Result<T> {
        let ov = self.inner(other)?;
        Ok(ov.norm_sqr() / (self.norm_sqr() * other.norm_sqr()))
    }

    /// Marginal Born probabilities for one site.
    pub fn site_distribution(&self, label: &str) -> Result<Vec<T>> {
        self.joint_distribution(&[label])
    }

    /// Joint Born probabilities for several sites, indexed mixed-radix in the
    /// order the labels are given.
    pub fn joint_distribution(&self, labels: &[&str]) -> Result<Vec<T>> {
        if !self.normalized {
            return Err(Error::Unnormalized);
        }
        let positions = labels
            .iter()
            .map(|l| self.register.position(l))
            .collect::<Result<Vec<_>>>()?;
        let dims = self.register.dims();
        let size: usize = positions.iter().map(|&p| dims[p]).product();
        let strides = self.register.strides();
        let mut probs = vec![T::zero(); size];
        for (idx, a) in self.amplitudes.iter().enumerate() {
            let j = positions
                .iter()
                .fold(0, |acc, &p| acc * dims[p] + (idx / strides[p]) % dims[p]);
            probs[j] = probs[j] + a.norm_sqr();
        }
        Ok(probs)
    }

    /// Reduced density matrix of one site.
    pub fn reduced_density(&self, label: &str) -> Result<CMatrix<T>> {
        if !self.normalized {
            return Err(Error::Unnormalized);
        }
        let p = self.register.position(label)?;
        let d = self.register.dims()[p];
        let stride = self.register.strides()[p];
        let mut rho = scalar::zeros(d, d);
        for base in 0..self.amplitudes.len() {
            if !(base / stride).is_multiple_of(d) {
                continue;
            }
            for i in 0..d {
                let ai = self.amplitudes[base + i * stride];
                if ai.norm_sqr() == T::zero() {
                    continue;
                }
                for j in 0..d {
                    let aj = self.amplitudes[base + j * stride];
                    rho[[i, j]] = rho[[i, j]] + ai * aj.conj();
                }
            }
        }
        Ok(rho)
    }

    /// Reorders tensor factors so the register follows `order`.
    pub fn permute_sites(&self, order: &[&str]) -> Result<Self> {
        if order.len() != self.register.len() {
            return Err(Error::DimensionMismatch { expected: self.register.len(), found: order.len() });
        }
        let positions = order
            .iter()
            .map(|l| self.register.position(l))
            .collect::<Result<Vec<_>>>()?;
        let dims: Vec<usize> = positions.iter().map(|&p| self.register.dims()[p]).collect();
        let register = QuditRegister::new(dims, order.to_vec())?;
        let mut amplitudes = vec![czero(); self.amplitudes.len()];
        for (idx, a) in self.amplitudes.iter().enumerate() {
            let levels = self.register.levels_of(idx);
            let new_levels: Vec<usize> = positions.iter().map(|&p| levels[p]).collect();
            amplitudes[register.index_of(&new_levels)] = *a;
        }
        Ok(StateVector { register, amplitudes, normalized: self.normalized })
    }

    /// Renames sites without touching amplitudes.
    pub fn relabel(&self, labels: &[&str]) -> Result<Self> {
        let register = QuditRegister::new(self.register.dims().to_vec(), labels.to_vec())?;
        Ok(StateVector { register, amplitudes: self.amplitudes.clone(), normalized: self.normalized })
    }

    /// Largest modulus of amplitude differences; infinite on register mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        if self.register != other.register {
            return T::infinity();
        }
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(T::zero(), T::max)
    }

    /// Maps every basis state through `f` (a permutation of level tuples
    /// between possibly different registers). Unitary when `f` is a bijection.
    pub fn relabel_basis<F>(&self, register: QuditRegister, mut f: F) -> Result<Self>
    where
        F: FnMut(&[usize]) -> Vec<usize>,
    {
        if register.total_dim() != self.register.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.register.total_dim(),
                found: register.total_dim(),
            });
        }
        let mut amplitudes = vec![czero(); self.amplitudes.len()];
        let mut hit = vec![false; self.amplitudes.len()];
        for (idx, a) in self.amplitudes.iter().enumerate() {
            let target = register.index_of(&f(&self.register.levels_of(idx)));
            if hit[target] {
                return Err(Error::InvalidGate("basis relabeling is not injective".into()));
            }
            hit[target] = true;
            amplitudes[target] = *a;
        }
        Ok(StateVector { register, amplitudes, normalized: self.normalized })
    }
}

#[derive(Serialize, Deserialize)]
struct StateVectorRepr<T> {
    dims: Vec<usize>,
    labels: Vec<String>,
    amplitudes: Vec<[T; 2]>,
    normalized: bool,
}

impl<T: Real> Serialize for StateVector<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        StateVectorRepr {
            dims: self.register.dims.clone(),
            labels: self.register.labels.clone(),
            amplitudes: self.amplitudes.iter().map(|z| [z.re, z.im]).collect(),
            normalized: self.normalized,
        }
        .serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for StateVector<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = StateVectorRepr::<T>::deserialize(d)?;
        let register = QuditRegister::new(repr.dims, repr.labels).map_err(serde::de::Error::custom)?;
        if repr.amplitudes.len() != register.total_dim() {
            return Err(serde::de::Error::custom(Error::DimensionMismatch {
                expected: register.total_dim(),
                found: repr.amplitudes.len(),
            }));
        }
        Ok(StateVector {
            register,
            amplitudes: repr.amplitudes.into_iter().map(|[re, im]| Complex::new(re, im)).collect(),
            normalized: repr.normalized,
        })
    }
}

/// A square matrix acting on an ordered subset of register sites.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalOperator<T: Real> {
    sites: Vec<String>,
    site_dims: Vec<usize>,
    matrix: CMatrix<T>,
    unitary: bool,
}

impl<T: Real> LocalOperator<T> {
    pub fn new<S: Into<String>>(sites: Vec<S>, site_dims: Vec<usize>, matrix: CMatrix<T>) -> Result<Self> {
        let sites: Vec<String> = sites.into_iter().map(Into::into).collect();
        if sites.len() != site_dims.len() {
            return Err(Error::DimensionMismatch { expected: sites.len(), found: site_dims.len() });
        }
        let mut seen = HashSet::new();
        for s in &sites {
            if !seen.insert(s.as_str()) {
                return Err(Error::DuplicateSite(s.clone()));
            }
        }
        let n: usize = site_dims.iter().product();
        let (r, c) = matrix.dim();
        if r != n || c != n {
            return Err(Error::DimensionMismatch { expected: n, found: r.max(c) });
        }
        let unitary = scalar::is_unitary(&matrix, T::tolerance());
        Ok(LocalOperator { sites, site_dims, matrix, unitary })
    }

    pub fn identity<S: Into<String>>(sites: Vec<S>, site_dims: Vec<usize>) -> Result<Self> {
        let n = site_dims.iter().product();
        Self::new(sites, site_dims, scalar::identity(n))
    }

    pub fn sites(&self) -> &[String] {
        &self.sites
    }

    pub fn site_dims(&self) -> &[usize] {
        &self.site_dims
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    fn same_sites(&self, other: &Self) -> Result<()> {
        if self.sites != other.sites || self.site_dims != other.site_dims {
            return Err(Error::RegisterMismatch);
        }
        Ok(())
    }

    /// `self · other` (apply `other` first); site lists must agree.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.same_sites(other)?;
        Self::new(self.sites.clone(), self.site_dims.clone(), self.matrix.dot(&other.matrix))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_sites(other)?;
        Self::new(self.sites.clone(), self.site_dims.clone(), &self.matrix + &other.matrix)
    }

    pub fn scaled(&self, factor: Complex<T>) -> Self {
        let matrix = self.matrix.mapv(|z| z * factor);
        let unitary = scalar::is_unitary(&matrix, T::tolerance());
        LocalOperator { sites: self.sites.clone(), site_dims: self.site_dims.clone(), matrix, unitary }
    }

    pub fn dagger(&self) -> Self {
        LocalOperator {
            sites: self.sites.clone(),
            site_dims: self.site_dims.clone(),
            matrix: scalar::dagger(&self.matrix),
            unitary: self.unitary,
        }
    }

    /// Tensor product on disjoint site sets; `self` is more significant.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let mut sites = self.sites.clone();
        sites.extend(other.sites.iter().cloned());
        let mut dims = self.site_dims.clone();
        dims.extend_from_slice(&other.site_dims);
        Self::new(sites, dims, scalar::kron(&self.matrix, &other.matrix))
    }

    /// `|v⟩⟨v| ⊗ self + (1 - |v⟩⟨v|) ⊗ 1` with the control as the most
    /// significant factor.
    pub fn controlled(&self, control: &str, control_dim: usize, value: usize) -> Result<Self> {
        if value >= control_dim {
            return Err(Error::DimensionMismatch { expected: control_dim, found: value });
        }
        let n = self.dim();
        let mut m = scalar::zeros(n * control_dim, n * control_dim);
        for k in 0..control_dim {
            for i in 0..n {
                for j in 0..n {
                    m[[k * n + i, k * n + j]] = if k == value {
                        self.matrix[[i, j]]
                    } else if i == j {
                        Complex::new(T::one(), T::zero())
                    } else {
                        czero()
                    };
                }
            }
        }
        let mut sites = vec![control.to_string()];
        sites.extend(self.sites.iter().cloned());
        let mut dims = vec![control_dim];
        dims.extend_from_slice(&self.site_dims);
        Self::new(sites, dims, m)
    }

    /// Full matrix on `register` (identity on the other sites).
    pub fn embed(&self, register: &QuditRegister) -> Result<CMatrix<T>> {
        let n = register.total_dim();
        let mut full = scalar::zeros(n, n);
        for j in 0..n {
            let col = StateVector::basis(register.clone(), &register.levels_of(j))?;
            let out = col.apply_local(self)?;
            for (i, a) in out.amplitudes().iter().enumerate() {
                full[[i, j]] = *a;
            }
        }
        Ok(full)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn reg(dims: &[usize], labels: &[&str]) -> QuditRegister {
        QuditRegister::new(dims.to_vec(), labels.to_vec()).unwrap()
    }

    #[test]
    fn tensor_examples() {
        let a = StateVector::<f64>::basis(reg(&[2], &["a"]), &[0]).unwrap();
        let b = StateVector::<f64>::basis(reg(&[3], &["b"]), &[0]).unwrap();
        let ab = StateVector::tensor(&[&a, &b]).unwrap();
        assert_eq!(ab.amplitudes().len(), 6);
        assert_eq!(ab.amplitudes()[0], c(1.0, 0.0));

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = StateVector::single("a", vec![c(h, 0.0), c(h, 0.0)]).unwrap();
        let one = StateVector::basis(reg(&[2], &["b"]), &[1]).unwrap();
        let s = plus.tensor_with(&one).unwrap();
        let expect = [0.0, h, 0.0, h];
        for (z, e) in s.amplitudes().iter().zip(expect) {
            assert!((z.re - e).abs() < 1e-15 && z.im == 0.0);
        }
        assert!(matches!(a.tensor_with(&a), Err(Error::DuplicateSite(_))));
    }

    #[test]
    fn norm_multiplies() {
        let a = StateVector::single("a", vec![c(1.0, 2.0), c(0.5, 0.0)]).unwrap();
        let b = StateVector::single("b", vec![c(0.0, 3.0), c(1.0, -1.0), c(2.0, 0.0)]).unwrap();
        let ab = a.tensor_with(&b).unwrap();
        assert!((ab.norm() - a.norm() * b.norm()).abs() < 1e-12);
    }

    #[test]
    fn reduced_density_product_state_is_projector() {
        let a = StateVector::<f64>::basis(reg(&[2, 3], &["a", "b"]), &[1, 2]).unwrap();
        let rho = a.reduced_density("b").unwrap();
        assert_eq!(rho[[2, 2]], c(1.0, 0.0));
        assert!(scalar::max_abs_diff(&rho.dot(&rho), &rho) < 1e-15);
        assert_eq!(a.site_distribution("a").unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn maximally_entangled_qutrits_reduce_to_identity() {
        let s3 = 1.0 / 3f64.sqrt();
        let mut amps = vec![c(0.0, 0.0); 9];
        for k in 0..3 {
            amps[4 * k] = c(s3, 0.0);
        }
        let s = StateVector::new(reg(&[3, 3], &["x", "y"]), amps).unwrap();
        for site in ["x", "y"] {
            let rho = s.reduced_density(site).unwrap();
            let target = scalar::identity::<f64>(3).mapv(|z| z / 3.0);
            assert!(scalar::max_abs_diff(&rho, &target) < 1e-12);
        }
    }

    #[test]
    fn unnormalized_rejected() {
        let s = StateVector::single("a", vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!(!s.is_normalized());
        assert_eq!(s.site_distribution("a"), Err(Error::Unnormalized));
        assert_eq!(s.reduced_density("a"), Err(Error::Unnormalized));
        assert!(s.normalize().unwrap().site_distribution("a").is_ok());
    }

    #[test]
    fn inner_basics() {
        let r = reg(&[2], &["a"]);
        let z = StateVector::<f64>::basis(r.clone(), &[0]).unwrap();
        let o = StateVector::<f64>::basis(r, &[1]).unwrap();
        assert_eq!(z.inner(&o).unwrap(), c(0.0, 0.0));
        assert_eq!(z.inner(&z).unwrap(), c(1.0, 0.0));
        let other = StateVector::<f64>::basis(reg(&[2], &["b"]), &[0]).unwrap();
        assert_eq!(z.inner(&other), Err(Error::RegisterMismatch));
    }

    #[test]
    fn apply_dimension_mismatch() {
        let s = StateVector::<f64>::basis(reg(&[2, 3], &["a", "b"]), &[0, 0]).unwrap();
        let op = LocalOperator::<f64>::identity(vec!["b"], vec![2]).unwrap();
        assert!(matches!(s.apply_local(&op), Err(Error::DimensionMismatch { .. })));
        let op = LocalOperator::<f64>::identity(vec!["zz"], vec![2]).unwrap();
        assert!(matches!(s.apply_local(&op), Err(Error::UnknownSite(_))));
        assert!(LocalOperator::<f64>::new(vec!["a"], vec![2], scalar::identity(3)).is_err());
    }

    #[test]
    fn controlled_operator_layout() {
        let x = LocalOperator::<f64>::new(
            vec!["t"],
            vec![2],
            ndarray::array![[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]],
        )
        .unwrap();
        let cx = x.controlled("ctl", 2, 1).unwrap();
        let s = StateVector::<f64>::basis(reg(&[2, 2], &["ctl", "t"]), &[1, 0]).unwrap();
        let out = s.apply_local(&cx).unwrap();
        assert_eq!(out.amplitude(&[1, 1]), c(1.0, 0.0));
        let s = StateVector::<f64>::basis(reg(&[2, 2], &["t", "ctl"]), &[0, 0]).unwrap();
        assert_eq!(s.apply_local(&cx).unwrap(), s);
    }

    #[test]
    fn json_roundtrip_bit_exact() {
        let s = StateVector::single("q", vec![c(0.1, -1.0 / 3.0), c(std::f64::consts::PI, 1e-300)]).unwrap();
        let js = serde_json::to_string(&s).unwrap();
        let back: StateVector<f64> = serde_json::from_str(&js).unwrap();
        for (a, b) in s.amplitudes().iter().zip(back.amplitudes()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
        assert_eq!(back.is_normalized(), s.is_normalized());
        assert!(js.contains("\"dims\":[2]"));
    }

    #[test]
    fn permute_sites_reorders_factors() {
        let a = StateVector::single("a", vec![c(0.6, 0.0), c(0.8, 0.0)]).unwrap();
        let b = StateVector::<f64>::basis(reg(&[3], &["b"]), &[2]).unwrap();
        let ab = a.tensor_with(&b).unwrap();
        let ba = b.tensor_with(&a).unwrap();
        assert_eq!(ab.permute_sites(&["b", "a"]).unwrap(), ba);
    }
}
