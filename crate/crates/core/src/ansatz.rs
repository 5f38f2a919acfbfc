//! Variational wavefunctions: a two-layer tanh perceptron with a signed
//! linear readout, and a Slater determinant whose orbitals are shifted by a
//! one-hidden-layer backflow network.
//!
//! Both families read a configuration through the `+1/-1` input encoding
//! (bit set → `+1`). Parameters travel as a [`FlatParameters`] vector whose
//! layout is fixed by its [`ParameterShape`]:
//!
//! * perceptron: `W1 (m x L)`, `b1 (m)`, `w2 (m)`, `b2 (1)`
//! * backflow:   `W1 (m x L)`, `b1 (m)`, `W2 (N*L x m)`, `b2 (N*L)`
//!
//! all row-major. Gradients are hand-derived reverse mode and come out as a
//! vector-Jacobian product over a batch of configurations.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::basis::Configuration;
use crate::error::{Error, Result};
use crate::linalg::det_and_adjugate;
use crate::scalar::Scalar;

/// Two-layer perceptron with `hidden` tanh units.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub sites: usize,
    pub hidden: usize,
}

impl MlpSpec {
    /// Hidden width `m = round(alpha * L)`, at least one.
    pub fn with_density(sites: usize, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::Domain(format!("hidden-unit density must be positive, got {alpha}")));
        }
        Self::with_hidden(sites, ((alpha * sites as f64).round() as usize).max(1))
    }

    pub fn with_hidden(sites: usize, hidden: usize) -> Result<Self> {
        if sites == 0 || hidden == 0 {
            return Err(Error::Domain("perceptron needs L >= 1 and m >= 1".into()));
        }
        Ok(Self { sites, hidden })
    }

    pub fn alpha(&self) -> f64 {
        self.hidden as f64 / self.sites as f64
    }

    pub fn parameter_count(&self) -> usize {
        self.hidden * (self.sites + 2) + 1
    }
}

/// Unpacked perceptron weights.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParameters<T> {
    pub w1: Array2<T>,
    pub b1: Array1<T>,
    pub w2: Array1<T>,
    pub b2: T,
}

/// Backflow Slater determinant: `M(c) = M0 + reshape(net(c), N x L)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BackflowSpec<T> {
    pub sites: usize,
    pub particles: usize,
    pub hidden: usize,
    /// Reference orbitals `M0`, one per row (`N x L`).
    pub reference: Array2<T>,
}

impl<T: Scalar> BackflowSpec<T> {
    pub fn new(sites: usize, particles: usize, hidden: usize, reference: Array2<T>) -> Result<Self> {
        if sites == 0 || hidden == 0 || particles > sites {
            return Err(Error::Domain(format!(
                "backflow needs m >= 1 and N <= L (L={sites}, N={particles}, m={hidden})"
            )));
        }
        if reference.dim() != (particles, sites) {
            return Err(Error::ContractViolation(format!(
                "reference orbitals have shape {:?}, expected ({particles}, {sites})",
                reference.dim()
            )));
        }
        Ok(Self { sites, particles, hidden, reference })
    }

    /// Reference made of `N` random orthonormal rows.
    pub fn with_random_reference(sites: usize, particles: usize, hidden: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows: Vec<Array1<T>> = Vec::with_capacity(particles);
        while rows.len() < particles {
            let mut v: Array1<T> = (0..sites).map(|_| T::of(StandardNormal.sample(&mut rng))).collect();
            for r in &rows {
                let overlap = r.dot(&v);
                v.scaled_add(-overlap, r);
            }
            let norm = v.dot(&v).sqrt();
            if norm > T::of(1e-6) {
                rows.push(v / norm);
            }
        }
        let mut reference = Array2::zeros((particles, sites));
        for (k, r) in rows.iter().enumerate() {
            reference.row_mut(k).assign(r);
        }
        Self::new(sites, particles, hidden, reference)
    }

    pub fn parameter_count(&self) -> usize {
        let (l, n, m) = (self.sites, self.particles, self.hidden);
        m * l + m + n * l * m + n * l
    }
}

/// Unpacked backflow weights.
#[derive(Clone, Debug, PartialEq)]
pub struct BackflowParameters<T> {
    pub w1: Array2<T>,
    pub b1: Array1<T>,
    pub w2: Array2<T>,
    pub b2: Array1<T>,
}

/// Layout descriptor of a flat parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ParameterShape {
    Mlp { sites: usize, hidden: usize },
    Backflow { sites: usize, particles: usize, hidden: usize },
}

/// A named contiguous slice of a flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub name: &'static str,
    pub offset: usize,
    pub dims: Vec<usize>,
    pub fan_in: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

impl ParameterShape {
    pub fn segments(&self) -> Vec<Segment> {
        let named: Vec<(&'static str, Vec<usize>, usize)> = match *self {
            ParameterShape::Mlp { sites, hidden } => vec![
                ("W1", vec![hidden, sites], sites),
                ("b1", vec![hidden], sites),
                ("w2", vec![hidden], hidden),
                ("b2", vec![1], hidden),
            ],
            ParameterShape::Backflow { sites, particles, hidden } => vec![
                ("W1", vec![hidden, sites], sites),
                ("b1", vec![hidden], sites),
                ("W2", vec![particles * sites, hidden], hidden),
                ("b2", vec![particles * sites], hidden),
            ],
        };
        let mut offset = 0;
        named
            .into_iter()
            .map(|(name, dims, fan_in)| {
                let seg = Segment { name, offset, dims, fan_in };
                offset += seg.len();
                seg
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.segments().iter().map(Segment::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sites(&self) -> usize {
        match *self {
            ParameterShape::Mlp { sites, .. } | ParameterShape::Backflow { sites, .. } => sites,
        }
    }

    pub fn hidden(&self) -> usize {
        match *self {
            ParameterShape::Mlp { hidden, .. } | ParameterShape::Backflow { hidden, .. } => hidden,
        }
    }
}

/// Contiguous parameter vector plus its layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FlatParameters<T> {
    pub shape: ParameterShape,
    pub values: Vec<T>,
}

impl<T: Scalar> FlatParameters<T> {
    pub fn zeros(shape: ParameterShape) -> Self {
        Self { values: vec![T::zero(); shape.len()], shape }
    }

    pub fn new(shape: ParameterShape, values: Vec<T>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::ContractViolation(format!(
                "{} values for a layout of {}",
                values.len(),
                shape.len()
            )));
        }
        Ok(Self { shape, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn segment(&self, name: &str) -> Option<&[T]> {
        self.shape.segments().into_iter().find(|s| s.name == name).map(|s| &self.values[s.range()])
    }

    fn view2(&self, seg: &Segment) -> ArrayView2<'_, T> {
        ArrayView2::from_shape((seg.dims[0], seg.dims[1]), &self.values[seg.range()]).unwrap()
    }

    fn view1(&self, seg: &Segment) -> ArrayView1<'_, T> {
        ArrayView1::from(&self.values[seg.range()])
    }

    pub fn from_mlp(p: &MlpParameters<T>) -> Self {
        let (hidden, sites) = p.w1.dim();
        let mut values = Vec::with_capacity(hidden * (sites + 2) + 1);
        values.extend(p.w1.iter().copied());
        values.extend(p.b1.iter().copied());
        values.extend(p.w2.iter().copied());
        values.push(p.b2);
        Self { shape: ParameterShape::Mlp { sites, hidden }, values }
    }

    pub fn to_mlp(&self) -> Result<MlpParameters<T>> {
        if !matches!(self.shape, ParameterShape::Mlp { .. }) {
            return Err(Error::ContractViolation("not a perceptron parameter vector".into()));
        }
        let seg = self.shape.segments();
        Ok(MlpParameters {
            w1: self.view2(&seg[0]).to_owned(),
            b1: self.view1(&seg[1]).to_owned(),
            w2: self.view1(&seg[2]).to_owned(),
            b2: self.values[seg[3].offset],
        })
    }

    pub fn from_backflow(p: &BackflowParameters<T>, particles: usize) -> Self {
        let (hidden, sites) = p.w1.dim();
        let mut values = Vec::new();
        values.extend(p.w1.iter().copied());
        values.extend(p.b1.iter().copied());
        values.extend(p.w2.iter().copied());
        values.extend(p.b2.iter().copied());
        Self { shape: ParameterShape::Backflow { sites, particles, hidden }, values }
    }

    pub fn to_backflow(&self) -> Result<BackflowParameters<T>> {
        if !matches!(self.shape, ParameterShape::Backflow { .. }) {
            return Err(Error::ContractViolation("not a backflow parameter vector".into()));
        }
        let seg = self.shape.segments();
        Ok(BackflowParameters {
            w1: self.view2(&seg[0]).to_owned(),
            b1: self.view1(&seg[1]).to_owned(),
            w2: self.view2(&seg[2]).to_owned(),
            b2: self.view1(&seg[3]).to_owned(),
        })
    }
}

/// Configurations together with their `+1/-1` network inputs (`S x L`).
#[derive(Clone, Debug)]
pub struct InputBatch<T> {
    sites: usize,
    states: Vec<Configuration>,
    inputs: Array2<T>,
}

impl<T: Scalar> InputBatch<T> {
    pub fn new(states: &[Configuration]) -> Result<Self> {
        let sites = states.first().map(|c| c.sites()).unwrap_or(0);
        if states.iter().any(|c| c.sites() != sites) {
            return Err(Error::ContractViolation("batch mixes configuration lengths".into()));
        }
        let inputs = Array2::from_shape_fn((states.len(), sites), |(s, i)| {
            if states[s].is_set(i) {
                T::one()
            } else {
                -T::one()
            }
        });
        Ok(Self { sites, states: states.to_vec(), inputs })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn states(&self) -> &[Configuration] {
        &self.states
    }
}

/// Either variational family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", bound = "T: Scalar")]
pub enum Ansatz<T> {
    Mlp(MlpSpec),
    Backflow(BackflowSpec<T>),
}

/// Intermediates of one forward pass: hidden activations, amplitudes and,
/// for the backflow family, the adjugate of every Slater matrix.
#[derive(Clone, Debug)]
pub struct ForwardPass<T> {
    hidden: Array2<T>,
    psi: Array1<T>,
    adjugates: Vec<Array2<T>>,
    shape: ParameterShape,
    len: usize,
}

impl<T> ForwardPass<T> {
    pub fn amplitudes(&self) -> &Array1<T> {
        &self.psi
    }
}

/// `tanh(X W1^T + b1)`, one row per configuration.
fn hidden_layer<T: Scalar>(w1: ArrayView2<T>, b1: ArrayView1<T>, batch: &InputBatch<T>) -> Array2<T> {
    let mut z = batch.inputs.dot(&w1.t());
    z += &b1;
    z.mapv_inplace(T::tanh);
    z
}

/// Backpropagates `d loss / d h` through `h = tanh(X W1^T + b1)` into the
/// `W1` and `b1` gradient slices.
fn backprop_hidden<T: Scalar>(
    delta_h: Array2<T>,
    hidden: &Array2<T>,
    batch: &InputBatch<T>,
    grad_w1: &mut [T],
    grad_b1: &mut [T],
) {
    let mut delta_z = delta_h;
    ndarray::Zip::from(&mut delta_z)
        .and(hidden)
        .for_each(|d, &h| *d *= T::one() - h * h);
    let gw1 = delta_z.t().dot(&batch.inputs);
    for (g, v) in grad_w1.iter_mut().zip(gw1.iter()) {
        *g = *v;
    }
    for (g, v) in grad_b1.iter_mut().zip(delta_z.sum_axis(Axis(0)).iter()) {
        *g = *v;
    }
}

impl<T: Scalar> Ansatz<T> {
    pub fn shape(&self) -> ParameterShape {
        match self {
            Ansatz::Mlp(spec) => ParameterShape::Mlp { sites: spec.sites, hidden: spec.hidden },
            Ansatz::Backflow(spec) => ParameterShape::Backflow {
                sites: spec.sites,
                particles: spec.particles,
                hidden: spec.hidden,
            },
        }
    }

    pub fn sites(&self) -> usize {
        self.shape().sites()
    }

    pub fn parameter_count(&self) -> usize {
        match self {
            Ansatz::Mlp(spec) => spec.parameter_count(),
            Ansatz::Backflow(spec) => spec.parameter_count(),
        }
    }

    /// Gaussian initialization with standard deviation `scale / sqrt(fan_in)`
    /// per tensor. The backflow output head (`W2`, `b2`) starts at zero so
    /// that `M(c) = M0` for every configuration.
    pub fn init_parameters(&self, seed: u64, scale: f64) -> Result<FlatParameters<T>> {
        if !(scale > 0.0) {
            return Err(Error::Domain(format!("initialization scale must be positive, got {scale}")));
        }
        let shape = self.shape();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = vec![T::zero(); shape.len()];
        let zero_head = matches!(self, Ansatz::Backflow(_));
        for seg in shape.segments() {
            if zero_head && (seg.name == "W2" || seg.name == "b2") {
                continue;
            }
            let std = scale / (seg.fan_in as f64).sqrt();
            for v in &mut values[seg.range()] {
                let x: f64 = StandardNormal.sample(&mut rng);
                *v = T::of(std * x);
            }
        }
        Ok(FlatParameters { shape, values })
    }

    fn check(&self, params: &FlatParameters<T>, batch: &InputBatch<T>) -> Result<()> {
        if params.shape != self.shape() || params.values.len() != params.shape.len() {
            return Err(Error::ContractViolation(format!(
                "parameter layout {:?} does not match ansatz layout {:?}",
                params.shape,
                self.shape()
            )));
        }
        if !batch.is_empty() && batch.sites != self.sites() {
            return Err(Error::ContractViolation(format!(
                "{}-site configurations fed to a {}-site ansatz",
                batch.sites,
                self.sites()
            )));
        }
        if let Ansatz::Backflow(spec) = self {
            if let Some(bad) = batch.states.iter().find(|c| c.popcount() != spec.particles) {
                return Err(Error::ContractViolation(format!(
                    "configuration {:#b} has {} particles, backflow expects {}",
                    bad.bits(),
                    bad.popcount(),
                    spec.particles
                )));
            }
        }
        Ok(())
    }

    /// Amplitudes `psi(c)` for every configuration in the batch, in order.
    pub fn amplitudes(&self, params: &FlatParameters<T>, batch: &InputBatch<T>) -> Result<Array1<T>> {
        Ok(self.forward_impl(params, batch, false)?.psi)
    }

    /// Forward pass that keeps what [`Ansatz::backward`] needs.
    pub fn forward(&self, params: &FlatParameters<T>, batch: &InputBatch<T>) -> Result<ForwardPass<T>> {
        self.forward_impl(params, batch, true)
    }

    fn forward_impl(&self, params: &FlatParameters<T>, batch: &InputBatch<T>, keep: bool) -> Result<ForwardPass<T>> {
        self.check(params, batch)?;
        let seg = params.shape.segments();
        let hidden = hidden_layer(params.view2(&seg[0]), params.view1(&seg[1]), batch);
        let (psi, adjugates) = match self {
            Ansatz::Mlp(_) => {
                let b2 = params.values[seg[3].offset];
                (hidden.dot(&params.view1(&seg[2])).mapv(|x| x + b2), Vec::new())
            }
            Ansatz::Backflow(spec) => {
                let mut out = hidden.dot(&params.view2(&seg[2]).t());
                out += &params.view1(&seg[3]);
                let mut adjugates = Vec::with_capacity(if keep { batch.len() } else { 0 });
                let psi = batch
                    .states
                    .iter()
                    .zip(out.outer_iter())
                    .map(|(&c, row)| {
                        let m = slater_matrix(spec, c, row);
                        if keep {
                            let (det, adj) = det_and_adjugate(m.view());
                            adjugates.push(adj);
                            det
                        } else {
                            crate::linalg::determinant(m.view())
                        }
                    })
                    .collect();
                (psi, adjugates)
            }
        };
        Ok(ForwardPass { hidden, psi, adjugates, shape: params.shape, len: batch.len() })
    }

    /// Vector-Jacobian product `sum_s weights[s] * d psi(s) / d theta`.
    pub fn vjp(&self, params: &FlatParameters<T>, batch: &InputBatch<T>, weights: ArrayView1<T>) -> Result<FlatParameters<T>> {
        let pass = self.forward(params, batch)?;
        self.backward(params, batch, &pass, weights)
    }

    /// Reverse pass over a [`ForwardPass`] computed with the same
    /// parameters and batch.
    pub fn backward(
        &self,
        params: &FlatParameters<T>,
        batch: &InputBatch<T>,
        pass: &ForwardPass<T>,
        weights: ArrayView1<T>,
    ) -> Result<FlatParameters<T>> {
        self.check(params, batch)?;
        if pass.shape != params.shape || pass.len != batch.len() {
            return Err(Error::ContractViolation("forward pass does not match this batch".into()));
        }
        if weights.len() != batch.len() {
            return Err(Error::ContractViolation(format!(
                "{} weights for a batch of {}",
                weights.len(),
                batch.len()
            )));
        }
        let seg = params.shape.segments();
        let hidden = &pass.hidden;
        let mut grad = FlatParameters::zeros(params.shape);
        let delta_h = match self {
            Ansatz::Mlp(_) => {
                let w2 = params.view1(&seg[2]);
                let gw2 = hidden.t().dot(&weights);
                grad.values[seg[2].range()].copy_from_slice(gw2.as_slice().unwrap());
                grad.values[seg[3].offset] = weights.sum();
                // d psi / d h_k = w2_k for every configuration.
                let mut delta = Array2::zeros(hidden.dim());
                for (mut row, &u) in delta.outer_iter_mut().zip(weights.iter()) {
                    row.assign(&(&w2 * u));
                }
                delta
            }
            Ansatz::Backflow(spec) => {
                let mut grad_out = Array2::zeros((batch.len(), spec.particles * spec.sites));
                for (s, (&c, adj)) in batch.states.iter().zip(&pass.adjugates).enumerate() {
                    let u = weights[s];
                    for (b, site) in c.occupied_sites().enumerate() {
                        for a in 0..spec.particles {
                            grad_out[[s, a * spec.sites + site]] = u * adj[[b, a]];
                        }
                    }
                }
                let gw2 = grad_out.t().dot(hidden);
                grad.values[seg[2].range()].copy_from_slice(gw2.as_standard_layout().as_slice().unwrap());
                let gb2 = grad_out.sum_axis(Axis(0));
                grad.values[seg[3].range()].copy_from_slice(gb2.as_slice().unwrap());
                grad_out.dot(&params.view2(&seg[2]))
            }
        };
        let (head, tail) = grad.values.split_at_mut(seg[1].offset);
        backprop_hidden(delta_h, hidden, batch, &mut head[seg[0].range()], &mut tail[..seg[1].len()]);
        Ok(grad)
    }

    /// `psi(c)` for a single configuration.
    pub fn amplitude(&self, params: &FlatParameters<T>, c: Configuration) -> Result<T> {
        Ok(self.amplitudes(params, &InputBatch::new(&[c])?)?[0])
    }

    /// `d psi(c) / d theta` for a single configuration.
    pub fn gradient(&self, params: &FlatParameters<T>, c: Configuration) -> Result<FlatParameters<T>> {
        self.vjp(params, &InputBatch::new(&[c])?, Array1::from_elem(1, T::one()).view())
    }
}

/// `M~(c)`: the columns of `M0 + reshape(out, N x L)` at the occupied sites
/// of `c`, in increasing site order.
fn slater_matrix<T: Scalar>(spec: &BackflowSpec<T>, c: Configuration, out: ArrayView1<T>) -> Array2<T> {
    let n = spec.particles;
    let sites = spec.sites;
    let mut m = Array2::zeros((n, n));
    for (b, site) in c.occupied_sites().enumerate() {
        for k in 0..n {
            m[[k, b]] = spec.reference[[k, site]] + out[k * sites + site];
        }
    }
    m
}

pub fn mlp_amplitude<T: Scalar>(p: &MlpParameters<T>, c: Configuration) -> Result<T> {
    let flat = FlatParameters::from_mlp(p);
    let spec = MlpSpec::with_hidden(p.w1.ncols(), p.w1.nrows())?;
    Ansatz::Mlp(spec).amplitude(&flat, c)
}

pub fn mlp_gradient<T: Scalar>(p: &MlpParameters<T>, c: Configuration) -> Result<FlatParameters<T>> {
    let flat = FlatParameters::from_mlp(p);
    let spec = MlpSpec::with_hidden(p.w1.ncols(), p.w1.nrows())?;
    Ansatz::Mlp(spec).gradient(&flat, c)
}

pub fn backflow_amplitude<T: Scalar>(p: &BackflowParameters<T>, spec: &BackflowSpec<T>, c: Configuration) -> Result<T> {
    let flat = FlatParameters::from_backflow(p, spec.particles);
    Ansatz::Backflow(spec.clone()).amplitude(&flat, c)
}

pub fn backflow_gradient<T: Scalar>(
    p: &BackflowParameters<T>,
    spec: &BackflowSpec<T>,
    c: Configuration,
) -> Result<FlatParameters<T>> {
    let flat = FlatParameters::from_backflow(p, spec.particles);
    Ansatz::Backflow(spec.clone()).gradient(&flat, c)
}

/// Ansatz plus parameters, for checkpointing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Checkpoint<T> {
    pub ansatz: Ansatz<T>,
    pub parameters: FlatParameters<T>,
}
