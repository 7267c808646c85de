//! Spin-model Hamiltonians and observables.
//!
//! Two models are supported: the axial next-nearest-neighbour Ising (ANNNI)
//! chain in the full `2^L` tensor-product basis, and the Lipkin-Meshkov-Glick
//! (LMG) model restricted to the maximal total-spin sector `S = L/2`.
//!
//! Chain basis convention: basis index `s` encodes the spin configuration
//! with site 1 as the most significant bit; bit value 0 is spin up
//! (`σ^z = +1`). All Hamiltonians of both models are real symmetric in these
//! bases, so they are stored as `Mat<f64>`.

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default ANNNI next-nearest-neighbour strength.
pub const DEFAULT_DELTA: f64 = -0.3;
/// Default LMG anisotropy.
pub const DEFAULT_GAMMA: f64 = 0.5;

fn one() -> f64 {
    1.0
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnniParams {
    #[serde(rename = "L")]
    pub sites: usize,
    #[serde(rename = "J", default = "one")]
    pub coupling: f64,
    #[serde(rename = "lambda")]
    pub field: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub boundary: Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmgParams {
    #[serde(rename = "L")]
    pub sites: usize,
    #[serde(rename = "J", default = "one")]
    pub coupling: f64,
    #[serde(rename = "lambda")]
    pub field: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

/// A fully specified model instance. Each variant only carries the fields
/// that are meaningful for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ModelSpec {
    #[serde(rename = "ANNNI")]
    Annni(AnnniParams),
    #[serde(rename = "LMG")]
    Lmg(LmgParams),
}

impl ModelSpec {
    /// ANNNI chain with `J = 1`, `Δ = -0.3` and open boundaries.
    pub fn annni(sites: usize, field: f64) -> Self {
        ModelSpec::Annni(AnnniParams {
            sites,
            coupling: 1.0,
            field,
            delta: DEFAULT_DELTA,
            boundary: Boundary::Open,
        })
    }

    /// LMG model with `J = 1` and `γ = 0.5`.
    pub fn lmg(sites: usize, field: f64) -> Self {
        ModelSpec::Lmg(LmgParams {
            sites,
            coupling: 1.0,
            field,
            gamma: DEFAULT_GAMMA,
        })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ModelSpec::Annni(_) => "ANNNI",
            ModelSpec::Lmg(_) => "LMG",
        }
    }

    pub fn sites(&self) -> usize {
        match self {
            ModelSpec::Annni(p) => p.sites,
            ModelSpec::Lmg(p) => p.sites,
        }
    }

    pub fn field(&self) -> f64 {
        match self {
            ModelSpec::Annni(p) => p.field,
            ModelSpec::Lmg(p) => p.field,
        }
    }

    pub fn coupling(&self) -> f64 {
        match self {
            ModelSpec::Annni(p) => p.coupling,
            ModelSpec::Lmg(p) => p.coupling,
        }
    }

    pub fn with_field(&self, field: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            ModelSpec::Annni(p) => p.field = field,
            ModelSpec::Lmg(p) => p.field = field,
        }
        out
    }

    pub fn with_sites(&self, sites: usize) -> Self {
        let mut out = self.clone();
        match &mut out {
            ModelSpec::Annni(p) => p.sites = sites,
            ModelSpec::Lmg(p) => p.sites = sites,
        }
        out
    }

    /// The basis the model's Hamiltonian is realized in.
    pub fn basis(&self) -> Basis {
        match self {
            ModelSpec::Annni(p) => Basis::FullSpinHalfChain { sites: p.sites },
            ModelSpec::Lmg(p) => Basis::CollectiveSpin { sites: p.sites },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, x: f64| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidModel(format!("{name} must be finite, got {x}")))
            }
        };
        if self.sites() == 0 {
            return Err(Error::InvalidModel("L must be at least 1".into()));
        }
        finite("J", self.coupling())?;
        finite("lambda", self.field())?;
        match self {
            ModelSpec::Annni(p) => {
                finite("delta", p.delta)?;
                if p.boundary == Boundary::Periodic && p.sites < 3 {
                    return Err(Error::InvalidModel(format!(
                        "periodic ANNNI chain needs L >= 3, got {}",
                        p.sites
                    )));
                }
            }
            ModelSpec::Lmg(p) => finite("gamma", p.gamma)?,
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    /// Tensor-product `σ^z` basis of `L` spins, dimension `2^L`.
    FullSpinHalfChain { sites: usize },
    /// Maximal total-spin multiplet `|S = L/2, m⟩`, dimension `L + 1`.
    CollectiveSpin { sites: usize },
}

impl Basis {
    pub fn sites(&self) -> usize {
        match *self {
            Basis::FullSpinHalfChain { sites } | Basis::CollectiveSpin { sites } => sites,
        }
    }

    pub fn dimension(&self) -> usize {
        match *self {
            Basis::FullSpinHalfChain { sites } => 1usize << sites,
            Basis::CollectiveSpin { sites } => sites + 1,
        }
    }
}

/// Caps on the dense matrices the engine is willing to build.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenseBudget {
    pub max_chain_sites: usize,
    pub max_collective_dim: usize,
}

impl Default for DenseBudget {
    fn default() -> Self {
        Self {
            max_chain_sites: 14,
            max_collective_dim: 4001,
        }
    }
}

impl DenseBudget {
    pub fn check(&self, basis: &Basis) -> Result<()> {
        match *basis {
            Basis::FullSpinHalfChain { sites } if sites > self.max_chain_sites => {
                Err(Error::BudgetExceeded {
                    dim: basis.dimension(),
                    budget: 1usize << self.max_chain_sites,
                })
            }
            Basis::CollectiveSpin { .. } if basis.dimension() > self.max_collective_dim => {
                Err(Error::BudgetExceeded {
                    dim: basis.dimension(),
                    budget: self.max_collective_dim,
                })
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HamiltonianMatrix {
    pub basis: Basis,
    pub matrix: Mat<f64>,
    pub spec: ModelSpec,
}

impl HamiltonianMatrix {
    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Largest `|M_ij - M_ji|` of a real square matrix.
pub fn max_asymmetry(m: faer::MatRef<'_, f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

#[inline]
fn site_bit(sites: usize, site: usize) -> usize {
    1usize << (sites - site)
}

/// `H = -J Σ_j [σ^x_j σ^x_{j+1} + Δ σ^x_j σ^x_{j+2} + λ σ^z_j]`.
pub fn build_annni_hamiltonian(spec: &ModelSpec, budget: &DenseBudget) -> Result<HamiltonianMatrix> {
    let ModelSpec::Annni(p) = spec else {
        return Err(Error::InvalidModel(format!(
            "expected an ANNNI spec, got {}",
            spec.kind_name()
        )));
    };
    spec.validate()?;
    let basis = spec.basis();
    budget.check(&basis)?;

    let l = p.sites;
    let dim = basis.dimension();
    let periodic = p.boundary == Boundary::Periodic;
    let mut bonds: Vec<(usize, f64)> = Vec::new();
    let mut push_bonds = |range: usize, strength: f64| {
        if strength == 0.0 {
            return;
        }
        let count = if periodic { l } else { l.saturating_sub(range) };
        for j in 1..=count {
            let k = (j - 1 + range) % l + 1;
            bonds.push((site_bit(l, j) | site_bit(l, k), -p.coupling * strength));
        }
    };
    push_bonds(1, 1.0);
    push_bonds(2, p.delta);

    let mut h = Mat::<f64>::zeros(dim, dim);
    for s in 0..dim {
        let down = s.count_ones() as f64;
        let magnetization = l as f64 - 2.0 * down;
        h[(s, s)] = -p.coupling * p.field * magnetization;
        for &(mask, amp) in &bonds {
            h[(s ^ mask, s)] += amp;
        }
    }
    Ok(HamiltonianMatrix {
        basis,
        matrix: h,
        spec: spec.clone(),
    })
}

/// Raising-operator matrix element `⟨m+1|S+|m⟩`.
#[inline]
fn ladder(spin: f64, m: f64) -> f64 {
    (spin * (spin + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
}

/// `H = -(J/L) Σ_{i<j} (σ^x_i σ^x_j + γ σ^y_i σ^y_j) - λ Σ_j σ^z_j` in the
/// `S = L/2` multiplet, i.e. `-(J/L)(2S_x² + 2γS_y² - (1+γ)L/2) - 2λS_z`.
pub fn build_lmg_hamiltonian(spec: &ModelSpec, budget: &DenseBudget) -> Result<HamiltonianMatrix> {
    let ModelSpec::Lmg(p) = spec else {
        return Err(Error::InvalidModel(format!(
            "expected an LMG spec, got {}",
            spec.kind_name()
        )));
    };
    spec.validate()?;
    let basis = spec.basis();
    budget.check(&basis)?;

    let l = p.sites as f64;
    let spin = l / 2.0;
    let dim = basis.dimension();
    let scale = -p.coupling / l;
    let mut h = Mat::<f64>::zeros(dim, dim);
    for i in 0..dim {
        let m = spin - i as f64;
        // S+S- + S-S+ = 2(S(S+1) - m²)
        let diag = (1.0 + p.gamma) * (spin * (spin + 1.0) - m * m) - (1.0 + p.gamma) * l / 2.0;
        h[(i, i)] = scale * diag - 2.0 * p.field * m;
        if i >= 2 {
            // ⟨m+2|S+²|m⟩
            let amp = ladder(spin, m) * ladder(spin, m + 1.0);
            let v = scale * 0.5 * (1.0 - p.gamma) * amp;
            h[(i - 2, i)] = v;
            h[(i, i - 2)] = v;
        }
    }
    Ok(HamiltonianMatrix {
        basis,
        matrix: h,
        spec: spec.clone(),
    })
}

/// The LMG Hamiltonian written out as explicit pair sums over the full
/// `2^L` chain basis. Exponentially expensive; exists as an independent
/// route for checking the collective-basis construction.
pub fn build_lmg_full_basis_hamiltonian(
    spec: &ModelSpec,
    budget: &DenseBudget,
) -> Result<HamiltonianMatrix> {
    let ModelSpec::Lmg(p) = spec else {
        return Err(Error::InvalidModel(format!(
            "expected an LMG spec, got {}",
            spec.kind_name()
        )));
    };
    spec.validate()?;
    let l = p.sites;
    let basis = Basis::FullSpinHalfChain { sites: l };
    budget.check(&basis)?;
    let dim = basis.dimension();
    let scale = -p.coupling / l as f64;
    let mut h = Mat::<f64>::zeros(dim, dim);
    for s in 0..dim {
        let up = |site: usize| s & site_bit(l, site) == 0;
        let magnetization = l as f64 - 2.0 * s.count_ones() as f64;
        h[(s, s)] = -p.field * magnetization;
        for i in 1..=l {
            for j in (i + 1)..=l {
                // σ^yσ^y on |ab⟩ picks up i·(±1) per site
                let sign = if up(i) == up(j) { 1.0 } else { -1.0 };
                let mask = site_bit(l, i) | site_bit(l, j);
                h[(s ^ mask, s)] += scale * (1.0 - p.gamma * sign);
            }
        }
    }
    Ok(HamiltonianMatrix {
        basis,
        matrix: h,
        spec: spec.clone(),
    })
}

/// Dispatch on the model kind.
pub fn build_hamiltonian(spec: &ModelSpec, budget: &DenseBudget) -> Result<HamiltonianMatrix> {
    match spec {
        ModelSpec::Annni(_) => build_annni_hamiltonian(spec, budget),
        ModelSpec::Lmg(_) => build_lmg_hamiltonian(spec, budget),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Observable specification. Sites are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "form")]
pub enum OperatorSpec {
    /// `σ^a_j` on a single site.
    LocalPauli { axis: Axis, site: usize },
    /// `(1/L) Σ_j σ^a_j`.
    CollectiveNormalized { axis: Axis },
}

impl OperatorSpec {
    pub fn local_x(site: usize) -> Self {
        OperatorSpec::LocalPauli { axis: Axis::X, site }
    }

    pub fn global_x() -> Self {
        OperatorSpec::CollectiveNormalized { axis: Axis::X }
    }

    pub fn is_local(&self) -> bool {
        matches!(self, OperatorSpec::LocalPauli { .. })
    }

    /// Pauli operators square to one; collective averages do not.
    pub fn is_unitary(&self) -> bool {
        self.is_local()
    }

    /// `r = j_V - j_W` for two local operators.
    pub fn separation(w: &OperatorSpec, v: &OperatorSpec) -> Option<i64> {
        match (w, v) {
            (
                OperatorSpec::LocalPauli { site: a, .. },
                OperatorSpec::LocalPauli { site: b, .. },
            ) => Some(*b as i64 - *a as i64),
            _ => None,
        }
    }
}

/// Default site for `W` in light-cone runs: `⌈L/4⌉`.
pub fn default_w_site(sites: usize) -> usize {
    sites.div_ceil(4).max(1)
}

/// Hermitian matrix kept as separate real and imaginary parts; the
/// imaginary part is `None` for real matrices.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub re: Mat<f64>,
    pub im: Option<Mat<f64>>,
}

impl OperatorMatrix {
    pub fn real(re: Mat<f64>) -> Self {
        Self { re, im: None }
    }

    pub fn dimension(&self) -> usize {
        self.re.nrows()
    }

    pub fn to_complex(&self) -> Mat<c64> {
        let n = self.re.nrows();
        Mat::from_fn(n, n, |i, j| {
            c64::new(
                self.re[(i, j)],
                self.im.as_ref().map_or(0.0, |m| m[(i, j)]),
            )
        })
    }

    /// Max-element deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = max_asymmetry(self.re.as_ref());
        if let Some(im) = &self.im {
            let n = im.nrows();
            for j in 0..n {
                for i in j..n {
                    worst = worst.max((im[(i, j)] + im[(j, i)]).abs());
                }
            }
        }
        worst
    }
}

fn pauli_site(sites: usize, axis: Axis, site: usize) -> OperatorMatrix {
    let dim = 1usize << sites;
    let bit = site_bit(sites, site);
    let mut re = Mat::<f64>::zeros(dim, dim);
    match axis {
        Axis::X => {
            for s in 0..dim {
                re[(s ^ bit, s)] = 1.0;
            }
            OperatorMatrix::real(re)
        }
        Axis::Z => {
            for s in 0..dim {
                re[(s, s)] = if s & bit == 0 { 1.0 } else { -1.0 };
            }
            OperatorMatrix::real(re)
        }
        Axis::Y => {
            // σ^y|↑⟩ = i|↓⟩, σ^y|↓⟩ = -i|↑⟩
            let mut im = Mat::<f64>::zeros(dim, dim);
            for s in 0..dim {
                im[(s ^ bit, s)] = if s & bit == 0 { 1.0 } else { -1.0 };
            }
            OperatorMatrix { re, im: Some(im) }
        }
    }
}

fn chain_average(sites: usize, axis: Axis) -> OperatorMatrix {
    let dim = 1usize << sites;
    let norm = 1.0 / sites as f64;
    let mut re = Mat::<f64>::zeros(dim, dim);
    let mut im = (axis == Axis::Y).then(|| Mat::<f64>::zeros(dim, dim));
    for s in 0..dim {
        for j in 1..=sites {
            let bit = site_bit(sites, j);
            let up = s & bit == 0;
            match axis {
                Axis::X => re[(s ^ bit, s)] += norm,
                Axis::Z => re[(s, s)] += if up { norm } else { -norm },
                Axis::Y => {
                    let m = im.as_mut().expect("allocated for y");
                    m[(s ^ bit, s)] += if up { norm } else { -norm };
                }
            }
        }
    }
    OperatorMatrix { re, im }
}

/// Spin-`S` angular momentum matrices in the `|S, m⟩` basis ordered
/// `m = S, S-1, …, -S`.
#[derive(Debug, Clone)]
pub struct SpinMatrices {
    pub x: Mat<c64>,
    pub y: Mat<c64>,
    pub z: Mat<c64>,
}

fn twice_spin(spin: f64) -> Result<usize> {
    let twice = 2.0 * spin;
    if !twice.is_finite() || twice < 0.0 || (twice - twice.round()).abs() > 1e-12 {
        return Err(Error::InvalidSpin(spin));
    }
    Ok(twice.round() as usize)
}

pub fn collective_spin_matrices(spin: f64) -> Result<SpinMatrices> {
    let dim = twice_spin(spin)? + 1;
    let mut x = Mat::<c64>::zeros(dim, dim);
    let mut y = Mat::<c64>::zeros(dim, dim);
    let mut z = Mat::<c64>::zeros(dim, dim);
    for i in 0..dim {
        let m = spin - i as f64;
        z[(i, i)] = c64::new(m, 0.0);
        if i >= 1 {
            let a = ladder(spin, m);
            x[(i - 1, i)] = c64::new(a / 2.0, 0.0);
            x[(i, i - 1)] = c64::new(a / 2.0, 0.0);
            y[(i - 1, i)] = c64::new(0.0, -a / 2.0);
            y[(i, i - 1)] = c64::new(0.0, a / 2.0);
        }
    }
    Ok(SpinMatrices { x, y, z })
}

/// `2 S_a / L` in the collective multiplet.
fn collective_average(sites: usize, axis: Axis) -> OperatorMatrix {
    let dim = sites + 1;
    let spin = sites as f64 / 2.0;
    let norm = 2.0 / sites as f64;
    let mut re = Mat::<f64>::zeros(dim, dim);
    let mut im = None;
    match axis {
        Axis::Z => {
            for i in 0..dim {
                re[(i, i)] = norm * (spin - i as f64);
            }
        }
        Axis::X => {
            for i in 1..dim {
                let a = norm * ladder(spin, spin - i as f64) / 2.0;
                re[(i - 1, i)] = a;
                re[(i, i - 1)] = a;
            }
        }
        Axis::Y => {
            let mut m = Mat::<f64>::zeros(dim, dim);
            for i in 1..dim {
                let a = norm * ladder(spin, spin - i as f64) / 2.0;
                m[(i - 1, i)] = -a;
                m[(i, i - 1)] = a;
            }
            im = Some(m);
        }
    }
    OperatorMatrix { re, im }
}

/// Realize an operator in a given basis.
///
/// `LocalPauli` needs the full chain basis. `CollectiveNormalized` maps to
/// `2S_a/L` in the collective basis and to `(1/L) Σ_j σ^a_j` in the chain
/// basis.
pub fn build_operator_in_basis(op: &OperatorSpec, basis: &Basis) -> Result<OperatorMatrix> {
    match (*op, *basis) {
        (OperatorSpec::LocalPauli { axis, site }, Basis::FullSpinHalfChain { sites }) => {
            if site == 0 || site > sites {
                return Err(Error::SiteOutOfRange { site, len: sites });
            }
            Ok(pauli_site(sites, axis, site))
        }
        (OperatorSpec::LocalPauli { .. }, Basis::CollectiveSpin { .. }) => Err(
            Error::BasisMismatch("single-site operators have no collective-basis form".into()),
        ),
        (OperatorSpec::CollectiveNormalized { axis }, Basis::CollectiveSpin { sites }) => {
            Ok(collective_average(sites, axis))
        }
        (OperatorSpec::CollectiveNormalized { axis }, Basis::FullSpinHalfChain { sites }) => {
            Ok(chain_average(sites, axis))
        }
    }
}

pub fn build_operator(op: &OperatorSpec, spec: &ModelSpec) -> Result<OperatorMatrix> {
    build_operator_in_basis(op, &spec.basis())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eigenvalues(m: &Mat<f64>) -> Vec<f64> {
        let mut e = m.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        e
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < tol, "{a:?} vs {b:?}");
        }
    }

    fn kron(a: &Mat<f64>, b: &Mat<f64>) -> Mat<f64> {
        let (ra, ca) = (a.nrows(), a.ncols());
        let (rb, cb) = (b.nrows(), b.ncols());
        Mat::from_fn(ra * rb, ca * cb, |i, j| a[(i / rb, j / cb)] * b[(i % rb, j % cb)])
    }

    #[test]
    fn single_bond_ising() {
        let mut spec = ModelSpec::annni(2, 0.0);
        if let ModelSpec::Annni(p) = &mut spec {
            p.delta = 0.0;
        }
        let h = build_annni_hamiltonian(&spec, &DenseBudget::default()).unwrap();
        let sx = Mat::from_fn(2, 2, |i, j| if i != j { 1.0 } else { 0.0 });
        let expected = kron(&sx, &sx);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(h.matrix[(i, j)], -expected[(i, j)]);
            }
        }
        assert_close(&eigenvalues(&h.matrix), &[-1.0, -1.0, 1.0, 1.0], 1e-12);
    }

    #[test]
    fn field_only_single_site() {
        let h = build_annni_hamiltonian(&ModelSpec::annni(1, 1.0), &DenseBudget::default()).unwrap();
        assert_close(&eigenvalues(&h.matrix), &[-1.0, 1.0], 1e-12);
        assert_eq!(h.matrix[(0, 0)], -1.0);
    }

    #[test]
    fn transverse_ising_two_sites_closed_form() {
        let mut spec = ModelSpec::annni(2, 1.0);
        if let ModelSpec::Annni(p) = &mut spec {
            p.delta = 0.0;
        }
        let h = build_annni_hamiltonian(&spec, &DenseBudget::default()).unwrap();
        assert!((eigenvalues(&h.matrix)[0] + 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn annni_rejects_bad_specs() {
        let budget = DenseBudget::default();
        let mut periodic = ModelSpec::annni(2, 1.0);
        if let ModelSpec::Annni(p) = &mut periodic {
            p.boundary = Boundary::Periodic;
        }
        assert!(matches!(
            build_annni_hamiltonian(&periodic, &budget),
            Err(Error::InvalidModel(_))
        ));
        assert!(matches!(
            build_annni_hamiltonian(&ModelSpec::annni(15, 1.0), &budget),
            Err(Error::BudgetExceeded { .. })
        ));
        assert!(matches!(
            build_annni_hamiltonian(&ModelSpec::lmg(4, 1.0), &budget),
            Err(Error::InvalidModel(_))
        ));
        assert!(matches!(
            build_lmg_hamiltonian(&ModelSpec::annni(4, 1.0), &budget),
            Err(Error::InvalidModel(_))
        ));
        assert!(matches!(
            build_lmg_hamiltonian(&ModelSpec::lmg(5000, 1.0), &budget),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn periodic_chain_is_translation_invariant() {
        let mut spec = ModelSpec::annni(5, 0.7);
        if let ModelSpec::Annni(p) = &mut spec {
            p.boundary = Boundary::Periodic;
        }
        let h = build_annni_hamiltonian(&spec, &DenseBudget::default()).unwrap();
        // cyclic shift of the bit string commutes with H
        let l = 5;
        let shift = |s: usize| ((s << 1) | (s >> (l - 1))) & ((1 << l) - 1);
        for s in 0..32 {
            for t in 0..32 {
                assert!((h.matrix[(shift(s), shift(t))] - h.matrix[(s, t)]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn lmg_single_spin() {
        let h = build_lmg_hamiltonian(&ModelSpec::lmg(1, 1.0), &DenseBudget::default()).unwrap();
        assert_close(&eigenvalues(&h.matrix), &[-1.0, 1.0], 1e-12);
    }

    #[test]
    fn lmg_two_spins_triplet_sector() {
        let mut spec = ModelSpec::lmg(2, 0.0);
        if let ModelSpec::Lmg(p) = &mut spec {
            p.gamma = 0.0;
        }
        let h = build_lmg_hamiltonian(&spec, &DenseBudget::default()).unwrap();
        assert_eq!(h.dimension(), 3);
        assert_close(&eigenvalues(&h.matrix), &[-0.5, -0.5, 0.5], 1e-12);
        // full 4x4 basis: ±1/2 twice each
        let full = build_lmg_full_basis_hamiltonian(&spec, &DenseBudget::default()).unwrap();
        assert_close(&eigenvalues(&full.matrix), &[-0.5, -0.5, 0.5, 0.5], 1e-12);
    }

    #[test]
    fn pauli_involution_and_locality() {
        let basis = Basis::FullSpinHalfChain { sites: 4 };
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            let p = build_operator_in_basis(&OperatorSpec::LocalPauli { axis, site: 2 }, &basis)
                .unwrap()
                .to_complex();
            let sq = &p * &p;
            for i in 0..16 {
                for j in 0..16 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((sq[(i, j)] - c64::new(want, 0.0)).norm() < 1e-12);
                }
            }
        }
        let a = build_operator_in_basis(&OperatorSpec::LocalPauli { axis: Axis::X, site: 1 }, &basis)
            .unwrap()
            .to_complex();
        let b = build_operator_in_basis(&OperatorSpec::LocalPauli { axis: Axis::Y, site: 3 }, &basis)
            .unwrap()
            .to_complex();
        let comm = &a * &b - &b * &a;
        let worst = (0..16)
            .flat_map(|i| (0..16).map(move |j| (i, j)))
            .map(|(i, j)| comm[(i, j)].norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-12);
    }

    #[test]
    fn site_one_is_most_significant() {
        let basis = Basis::FullSpinHalfChain { sites: 3 };
        let z1 = build_operator_in_basis(&OperatorSpec::LocalPauli { axis: Axis::Z, site: 1 }, &basis)
            .unwrap();
        // |↓↑↑⟩ = index 4
        assert_eq!(z1.re[(4, 4)], -1.0);
        assert_eq!(z1.re[(1, 1)], 1.0);
    }

    #[test]
    fn operator_errors() {
        let chain = Basis::FullSpinHalfChain { sites: 3 };
        assert!(matches!(
            build_operator_in_basis(&OperatorSpec::local_x(4), &chain),
            Err(Error::SiteOutOfRange { .. })
        ));
        assert!(matches!(
            build_operator_in_basis(&OperatorSpec::local_x(0), &chain),
            Err(Error::SiteOutOfRange { .. })
        ));
        assert!(matches!(
            build_operator(&OperatorSpec::local_x(1), &ModelSpec::lmg(4, 1.0)),
            Err(Error::BasisMismatch(_))
        ));
    }

    #[test]
    fn collective_x_spin_one() {
        let op = build_operator(&OperatorSpec::global_x(), &ModelSpec::lmg(2, 1.0)).unwrap();
        assert_close(&eigenvalues(&op.re), &[-1.0, 0.0, 1.0], 1e-12);
    }

    #[test]
    fn collective_x_large_l_has_unit_norm() {
        let op = build_operator(&OperatorSpec::global_x(), &ModelSpec::lmg(1000, 1.0)).unwrap();
        let e = eigenvalues(&op.re);
        assert!((e[e.len() - 1] - 1.0).abs() < 1e-12);
        assert!((e[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spin_matrices_small_cases() {
        let half = collective_spin_matrices(0.5).unwrap();
        assert_eq!(half.z[(0, 0)], c64::new(0.5, 0.0));
        assert_eq!(half.x[(0, 1)], c64::new(0.5, 0.0));
        assert_eq!(half.y[(0, 1)], c64::new(0.0, -0.5));
        let one = collective_spin_matrices(1.0).unwrap();
        let diag: Vec<f64> = (0..3).map(|i| one.z[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, 0.0, -1.0]);
        assert!(matches!(collective_spin_matrices(0.3), Err(Error::InvalidSpin(_))));
        assert!(matches!(collective_spin_matrices(-1.0), Err(Error::InvalidSpin(_))));
    }

    #[test]
    fn spin_commutators() {
        let s = collective_spin_matrices(5.0).unwrap();
        let i = c64::new(0.0, 1.0);
        let cyc = [(&s.x, &s.y, &s.z), (&s.y, &s.z, &s.x), (&s.z, &s.x, &s.y)];
        for (a, b, c) in cyc {
            let d = a * b - b * a;
            let n = d.nrows();
            let mut worst = 0.0f64;
            for r in 0..n {
                for k in 0..n {
                    worst = worst.max((d[(r, k)] - i * c[(r, k)]).norm());
                }
            }
            assert!(worst < 1e-12, "{worst}");
        }
    }

    #[test]
    fn spec_serde_rejects_foreign_fields() {
        let ok: ModelSpec =
            serde_json::from_str(r#"{"kind":"LMG","L":10,"lambda":1.0}"#).unwrap();
        assert_eq!(ok, ModelSpec::lmg(10, 1.0));
        assert!(serde_json::from_str::<ModelSpec>(
            r#"{"kind":"LMG","L":10,"lambda":1.0,"delta":-0.3}"#
        )
        .is_err());
        assert!(serde_json::from_str::<ModelSpec>(
            r#"{"kind":"ANNNI","L":10,"lambda":1.0,"gamma":0.5}"#
        )
        .is_err());
    }
}
