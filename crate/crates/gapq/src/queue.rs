//! The embedded queue-length chain at departure epochs.
//!
//! Minor-road vehicles form a single-server queue with batch Poisson
//! arrivals and semi-Markov services. Watching the queue just after each
//! departure gives a Markov chain on (queue length, road phase) whose
//! stationary transform solves the row-vector functional equation
//!
//! `f(z) (zI - A(z)) = f(0) (B(z) A*(z) - A(z))`
//!
//! with `A(z) = G(lambda(1 - B(z)))` the per-service arrival transform,
//! `A*(z)` its exceptional-first-service variant, and `B(z)` the batch PGF.
//! The unknown boundary row `f(0)` (probabilities of leaving an empty system
//! in each phase) is pinned by:
//!
//! * one linear condition per determinant zero of `zI - A(z)` strictly
//!   inside the unit disk (the right-hand side must stay solvable there),
//! * the normalization `F(1) = sum_i f_i(1) = 1`, taken as a jet limit at
//!   the removable singularity `z = 1`.
//!
//! The same machinery solves the chain of whole batches (super customers):
//! every batch is served back to back, which swaps `A(z)` for the batch
//! service transform and makes the arrival PGF the identity.

use num_complex::Complex64;

use crate::numerics::{
    eigenvalues, null_space, solve_linear, unit_disk_roots, DiskRootProblem, Jet,
    NumericsError, SquareMatrix, Tolerances,
};
use crate::service::ServiceTransform;
use crate::ModelError;

/// Distribution of the number of vehicles per minor-road arrival batch,
/// supported on `{1, 2, ...}`; `probs[k]` is `P(B = k+1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchDistribution {
    probs: Vec<f64>,
}

impl BatchDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self, ModelError> {
        if probs.is_empty() {
            return Err(ModelError::EmptyBatchDistribution);
        }
        for (k, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(ModelError::BatchProbabilityNegative { size: k + 1, prob: p });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ModelError::BatchProbabilitiesNotNormalized { sum });
        }
        let mut probs: Vec<f64> = probs.iter().map(|p| p / sum).collect();
        while probs.len() > 1 && *probs.last().unwrap() == 0.0 {
            probs.pop();
        }
        Ok(Self { probs })
    }

    /// Every batch has exactly `size` vehicles.
    pub fn deterministic(size: usize) -> Result<Self, ModelError> {
        if size == 0 {
            return Err(ModelError::EmptyBatchDistribution);
        }
        let mut probs = vec![0.0; size];
        probs[size - 1] = 1.0;
        Self::new(probs)
    }

    /// Uniform on `{1, ..., max}`.
    pub fn uniform(max: usize) -> Result<Self, ModelError> {
        if max == 0 {
            return Err(ModelError::EmptyBatchDistribution);
        }
        Self::new(vec![1.0 / max as f64; max])
    }

    /// Two-point mixture `P(B=a) = pa`, `P(B=b) = 1 - pa`.
    pub fn two_point(a: usize, pa: f64, b: usize) -> Result<Self, ModelError> {
        if a == 0 || b == 0 || a == b {
            return Err(ModelError::EmptyBatchDistribution);
        }
        let mut probs = vec![0.0; a.max(b)];
        probs[a - 1] = pa;
        probs[b - 1] = 1.0 - pa;
        Self::new(probs)
    }

    pub fn max_size(&self) -> usize {
        self.probs.len()
    }

    /// `P(B = k)`, zero outside the support.
    pub fn prob(&self, k: usize) -> f64 {
        if k == 0 || k > self.probs.len() {
            0.0
        } else {
            self.probs[k - 1]
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 1) as f64 * p)
            .sum()
    }

    /// `E[B(B-1)]`, the second factorial moment.
    pub fn second_factorial(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| ((i + 1) * i) as f64 * p)
            .sum()
    }

    /// `B(z) = sum_k P(B=k) z^k` on jets, by Horner evaluation.
    pub fn pgf(&self, z: &Jet) -> Jet {
        let mut acc = Jet::constant(Complex64::new(0.0, 0.0));
        for &p in self.probs.iter().rev() {
            acc = &(&acc * z) + &Jet::constant(Complex64::new(p, 0.0));
        }
        &acc * z
    }
}

/// Which departure process the chain follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChainUnit {
    /// One embedded step per vehicle.
    Vehicle,
    /// One embedded step per whole batch served back to back.
    Batch,
}

/// The functional-equation ingredients `A(z)`, `A*(z)`, `B(z)` for one
/// parametrized intersection, in either chain unit.
#[derive(Clone)]
pub struct MarkedPgfSystem {
    service: ServiceTransform,
    lambda: f64,
    batch: BatchDistribution,
    unit: ChainUnit,
    tol: Tolerances,
}

/// `A(z)`, `A*(z)`, `B(z)`, and the chain equation they define.
pub fn build_system(
    service: ServiceTransform,
    lambda: f64,
    batch: BatchDistribution,
) -> Result<MarkedPgfSystem, ModelError> {
    MarkedPgfSystem::new(service, lambda, batch, ChainUnit::Vehicle)
}

impl MarkedPgfSystem {
    pub fn new(
        service: ServiceTransform,
        lambda: f64,
        batch: BatchDistribution,
        unit: ChainUnit,
    ) -> Result<Self, ModelError> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(ModelError::NonPositiveArrivalRate { rate: lambda });
        }
        Ok(Self {
            service,
            lambda,
            batch,
            unit,
            tol: Tolerances::default(),
        })
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    pub fn n_phases(&self) -> usize {
        self.service.n_phases()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn batch(&self) -> &BatchDistribution {
        &self.batch
    }

    pub fn service(&self) -> &ServiceTransform {
        &self.service
    }

    pub fn unit(&self) -> ChainUnit {
        self.unit
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    /// Arrival PGF of the chain: the batch PGF per vehicle, the identity per
    /// batch (super customers arrive one batch at a time).
    pub fn arrival_pgf(&self, z: &Jet) -> Jet {
        match self.unit {
            ChainUnit::Vehicle => self.batch.pgf(z),
            ChainUnit::Batch => z.clone(),
        }
    }

    /// Service transform of one chain unit at `s`.
    pub fn unit_service(&self, s: &Jet) -> Result<SquareMatrix, NumericsError> {
        let g = self.service.transform(s)?;
        match self.unit {
            ChainUnit::Vehicle => Ok(g),
            ChainUnit::Batch => {
                // Batch service: all vehicles of the batch in a row, so the
                // transform is E[G(s)^B].
                let n = self.n_phases();
                let mut acc = SquareMatrix::zero(n);
                let mut power = SquareMatrix::identity(n);
                for k in 1..=self.batch.max_size() {
                    power = power.matmul(&g);
                    let p = self.batch.prob(k);
                    if p > 0.0 {
                        acc = acc.add(&power.scale_complex(Complex64::new(p, 0.0)));
                    }
                }
                Ok(acc)
            }
        }
    }

    /// `A(z) = unit_service(lambda (1 - arrival_pgf(z)))`.
    pub fn a(&self, z: &Jet) -> Result<SquareMatrix, NumericsError> {
        let one = Jet::constant(Complex64::new(1.0, 0.0));
        let s = (&one - &self.arrival_pgf(z)).scale(Complex64::new(self.lambda, 0.0));
        self.unit_service(&s)
    }

    /// `A*(z) = Pbar A(z)`: the first unit of a busy period scans from its
    /// own arrival epoch, reached from the last departure through one
    /// exponential interarrival.
    pub fn a_star(&self, z: &Jet) -> Result<SquareMatrix, NumericsError> {
        let pbar = self.service.road().phase_at_exponential(self.lambda)?;
        Ok(pbar.matmul(&self.a(z)?))
    }

    /// Right-hand side matrix `R(z) = B(z) A*(z) - A(z)` of the chain
    /// equation, so that `f(z)(zI - A(z)) = f(0) R(z)`.
    pub fn rhs(&self, z: &Jet) -> Result<SquareMatrix, NumericsError> {
        let a = self.a(z)?;
        let astar = self.a_star(z)?;
        let b = self.arrival_pgf(z);
        Ok(astar.scale_jet(&b).sub(&a))
    }

    /// `zI - A(z)` as jets.
    pub fn kernel(&self, z: &Jet) -> Result<SquareMatrix, NumericsError> {
        let n = self.n_phases();
        let a = self.a(z)?;
        let mut m = a.scale_complex(Complex64::new(-1.0, 0.0));
        for i in 0..n {
            m.set(i, i, &m.get(i, i).clone() + z);
        }
        Ok(m)
    }

    /// `det(zI - A(z)) / (z - 1)` and its derivative at a point. The factor
    /// `z - 1` removes the known determinant zero on the unit circle so that
    /// contour certification near `|z| = 1` sees only the interior zeros.
    fn reduced_determinant(&self, z: Complex64) -> Result<(Complex64, Complex64), NumericsError> {
        let zj = Jet::variable(z, 1);
        let det = self.kernel(&zj)?.det();
        let den = &zj - &Jet::constant_at(Complex64::new(1.0, 0.0), 1);
        let q = det.try_div(&den)?;
        Ok((q.value(), q.derivative(1)))
    }

    /// Offered load `rho = lambda E[B] E[G]` of the vehicle chain; the batch
    /// chain shares the same stability region.
    pub fn load(&self) -> Result<f64, ModelError> {
        Ok(self.lambda * self.batch.mean() * self.service.mean_service()?)
    }

    /// Solve the chain equation for jets of order `jet_order` at `z = 1`.
    pub fn solve(&self) -> Result<QueueSolution, ModelError> {
        solve_queue(self)
    }
}

/// Offered load `rho = lambda E[B] E[G]`.
pub fn load(
    service: &ServiceTransform,
    lambda: f64,
    batch: &BatchDistribution,
) -> Result<f64, ModelError> {
    Ok(lambda * batch.mean() * service.mean_service()?)
}

/// Stationary transform of the departure-epoch chain.
#[derive(Clone)]
pub struct QueueSolution {
    n: usize,
    lambda: f64,
    load: f64,
    /// `f_i(0)`: probability of leaving an empty system in phase `i`.
    boundary: Vec<f64>,
    /// Jets of `f_i` at `z = 1`, one per phase, order `jet_order`.
    jets_at_one: Vec<Jet>,
    /// Determinant zeros strictly inside the unit disk.
    roots: Vec<Complex64>,
}

impl QueueSolution {
    pub fn boundary(&self) -> &[f64] {
        &self.boundary
    }

    pub fn roots(&self) -> &[Complex64] {
        &self.roots
    }

    pub fn load(&self) -> f64 {
        self.load
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n_phases(&self) -> usize {
        self.n
    }

    /// Jet of `f_i` at `z = 1`.
    pub fn phase_jet(&self, i: usize) -> &Jet {
        &self.jets_at_one[i]
    }

    /// Jet of `F(z) = sum_i f_i(z)` at `z = 1`; `F(1) = 1` by construction.
    pub fn total_jet(&self) -> Jet {
        let mut acc = self.jets_at_one[0].clone();
        for j in &self.jets_at_one[1..] {
            acc = &acc + j;
        }
        acc
    }
}

/// Mean and variance of the departure-epoch queue length, from the jets of
/// `F` at `z = 1`.
pub fn queue_length_moments(qs: &QueueSolution) -> (f64, f64) {
    let f = qs.total_jet();
    let ex = f.coeff(1).re;
    let exx1 = 2.0 * f.coeff(2).re;
    (ex, exx1 + ex - ex * ex)
}

/// Solve for the boundary row and the jets of `f` at `z = 1`.
///
/// The jets come out one order higher internally than requested because the
/// top-order coefficient along the singular direction is fixed by the next
/// order's solvability.
pub fn solve_queue(sys: &MarkedPgfSystem) -> Result<QueueSolution, ModelError> {
    let n = sys.n_phases();
    let tol = sys.tolerances();
    let rho = sys.load()?;
    if rho >= tol.max_load {
        return Err(ModelError::LoadExceedsStableLimit {
            load: rho,
            limit: tol.max_load,
        });
    }

    // Interior determinant zeros. The eigenvalue branches of A(z) seed the
    // classical fixed-point iteration; the certified subdivision search is
    // the fallback inside the root finder.
    let failed = std::cell::Cell::new(false);
    let nanc = Complex64::new(f64::NAN, f64::NAN);
    let value_and_derivative = |z: Complex64| match sys.reduced_determinant(z) {
        Ok(p) => p,
        Err(_) => {
            failed.set(true);
            (nanc, nanc)
        }
    };
    let eigen_seed = |z: Complex64| match sys.a(&Jet::constant(z)) {
        Ok(a) => eigenvalues(&a),
        Err(_) => {
            failed.set(true);
            vec![nanc; n]
        }
    };
    let problem = DiskRootProblem {
        value_and_derivative: &value_and_derivative,
        expected: n - 1,
        eigen_seed: Some(&eigen_seed),
    };
    let roots = unit_disk_roots(&problem, tol).map_err(|e| {
        if failed.get() {
            ModelError::Numerics(NumericsError::NonFinite("chain kernel evaluation"))
        } else {
            ModelError::Numerics(e)
        }
    })?;

    // One linear condition on f(0) per interior zero: at a zero the kernel
    // is singular, so the right-hand side must be orthogonal to each right
    // null vector v, giving f(0) . (R(zhat) v) = 0. Zeros are grouped so a
    // multiple zero contributes its whole null space once.
    let mut conditions: Vec<Vec<Complex64>> = Vec::new();
    let mut grouped: Vec<(Complex64, usize)> = Vec::new();
    for &r in &roots {
        match grouped.iter_mut().find(|(z, _)| (*z - r).norm() < 1e-7) {
            Some((_, m)) => *m += 1,
            None => grouped.push((r, 1)),
        }
    }
    for &(zhat, multiplicity) in &grouped {
        let zj = Jet::constant(zhat);
        let kernel = sys.kernel(&zj)?;
        let flat: Vec<Complex64> = (0..n * n)
            .map(|idx| kernel.get(idx / n, idx % n).value())
            .collect();
        let null = null_space(&flat, n, tol.rank_tol);
        if null.is_empty() || null.len() < multiplicity {
            return Err(ModelError::DegenerateRootCondition {
                nullity: null.len(),
                multiplicity,
            });
        }
        let rhs = sys.rhs(&zj)?;
        for v in null.iter().take(multiplicity) {
            // Column vector R(zhat) v; its entries are the coefficients of
            // the linear condition on f(0).
            let mut cond = vec![Complex64::new(0.0, 0.0); n];
            for (i, c) in cond.iter_mut().enumerate() {
                for j in 0..n {
                    *c += rhs.get(i, j).value() * v[j];
                }
            }
            conditions.push(cond);
        }
    }
    if conditions.len() != n - 1 {
        return Err(ModelError::DegenerateRootCondition {
            nullity: conditions.len(),
            multiplicity: n - 1,
        });
    }

    // Jets of the chain equation at z = 1, one order above the requested jet
    // order: the recurrence for order k consults solvability at order k+1.
    let order = tol.jet_order + 1;
    let zj = Jet::variable(Complex64::new(1.0, 0.0), order);
    let kernel_jets = sys.kernel(&zj)?;
    let rhs_jets = sys.rhs(&zj)?;
    let m_coeff = |k: usize| -> Vec<Complex64> {
        (0..n * n)
            .map(|idx| kernel_jets.get(idx / n, idx % n).coeff(k))
            .collect()
    };
    let m0 = m_coeff(0);
    let m_all: Vec<Vec<Complex64>> = (0..=order).map(m_coeff).collect();

    // Stationary row of the one-step phase kernel P = A(1): left null vector
    // of M0 = I - P.
    let mut m0t = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            m0t[i * n + j] = m0[j * n + i];
        }
    }
    let pi = {
        // M0 = I - P has natural scale 1 (P is stochastic); its entries can
        // still all be ~1e-16 when n = 1. Rescale the relative tolerance so
        // the rank decision is taken against the natural scale.
        let m0_scale = m0t
            .iter()
            .map(|c| c.norm())
            .fold(0.0f64, f64::max)
            .max(1e-300);
        let eff_tol = tol.rank_tol * m0_scale.max(1.0) / m0_scale;
        let basis = null_space(&m0t, n, eff_tol);
        if basis.len() != 1 {
            return Err(ModelError::StationaryVectorNotUnique {
                dimension: basis.len(),
            });
        }
        let total: Complex64 = basis[0].iter().sum();
        basis[0].iter().map(|c| c / total).collect::<Vec<_>>()
    };
    // Solvability divisor pi M1 1 = 1 - (chain drift); positive for stable
    // chains.
    let m1 = &m_all[1];
    let pi_m1_one: Complex64 = (0..n)
        .map(|i| pi[i] * (0..n).map(|j| m1[i * n + j]).sum::<Complex64>())
        .sum();
    if pi_m1_one.re <= 0.0 {
        return Err(ModelError::LoadExceedsStableLimit {
            load: 1.0 - pi_m1_one.re,
            limit: tol.max_load,
        });
    }

    // Bordered matrix [[M0^T, 1], [1^T, 0]]: nonsingular because M0's right
    // null space is spanned by 1 and its left null space by pi.
    let bordered = SquareMatrix::from_fn(n + 1, |i, j| {
        let v = if i < n && j < n {
            m0[j * n + i]
        } else if i == n && j == n {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(1.0, 0.0)
        };
        Jet::constant(v)
    });

    // Per basis vector e_b: run the recurrence f_k M0 = W_k - sum f_j M_{k-j}
    // with W the b-th row of R(z)'s jets, splitting each f_k into the
    // bordered particular solution plus alpha_k pi from the next order.
    let mut basis_jets: Vec<Vec<Vec<Complex64>>> = Vec::with_capacity(n);
    let scale = kernel_jets.norm().max(rhs_jets.norm()).max(1.0);
    for b in 0..n {
        let w = |k: usize| -> Vec<Complex64> {
            (0..n).map(|j| rhs_jets.get(b, j).coeff(k)).collect()
        };
        let mut f_orders: Vec<Vec<Complex64>> = Vec::with_capacity(order);
        for k in 0..order {
            // b_k = W_k - sum_{j<k} f_j M_{k-j}
            let mut bk = w(k);
            for (j, fj) in f_orders.iter().enumerate() {
                let m = &m_all[k - j];
                for col in 0..n {
                    for row in 0..n {
                        bk[col] -= fj[row] * m[row * n + col];
                    }
                }
            }
            let slack: Complex64 = bk.iter().sum();
            if slack.norm() > 1e-6 * scale {
                return Err(ModelError::NormalizationInconsistent {
                    residual: slack.norm(),
                });
            }
            // Particular solution with sum zero, via the bordered system.
            let rhs_col: Vec<Jet> = bk
                .iter()
                .map(|c| Jet::constant(*c))
                .chain(std::iter::once(Jet::constant(Complex64::new(0.0, 0.0))))
                .collect();
            let sol = solve_linear(&bordered, &rhs_col, tol)?;
            let f_part: Vec<Complex64> = sol[..n].iter().map(|j| j.value()).collect();
            // alpha_k from solvability of order k+1:
            // (W_{k+1} - sum_{j<k} f_j M_{k+1-j} - f_k M_1) . 1 = 0.
            let mut ck = w(k + 1);
            for (j, fj) in f_orders.iter().enumerate() {
                let m = &m_all[k + 1 - j];
                for col in 0..n {
                    for row in 0..n {
                        ck[col] -= fj[row] * m[row * n + col];
                    }
                }
            }
            let ck_sum: Complex64 = ck.iter().sum();
            let fp_m1_one: Complex64 = (0..n)
                .map(|row| {
                    f_part[row] * (0..n).map(|col| m1[row * n + col]).sum::<Complex64>()
                })
                .sum();
            let alpha = (ck_sum - fp_m1_one) / pi_m1_one;
            let fk: Vec<Complex64> = (0..n).map(|i| f_part[i] + alpha * pi[i]).collect();
            f_orders.push(fk);
        }
        basis_jets.push(f_orders);
    }

    // Boundary system: one row per interior-zero condition, then the
    // normalization F(1) = sum_i f(0)_i L_i = 1 with L_i the total mass of
    // basis run i at z = 1.
    let mut rows: Vec<Vec<Complex64>> = conditions;
    let norm_row: Vec<Complex64> = (0..n)
        .map(|b| basis_jets[b][0].iter().sum::<Complex64>())
        .collect();
    rows.push(norm_row);
    let a_mat = SquareMatrix::from_fn(n, |i, j| Jet::constant(rows[i][j]));
    let mut rhs_vec = vec![Jet::constant(Complex64::new(0.0, 0.0)); n];
    rhs_vec[n - 1] = Jet::constant(Complex64::new(1.0, 0.0));
    let f0 = solve_linear(&a_mat, &rhs_vec, tol)?;

    let mut boundary = Vec::with_capacity(n);
    for (i, j) in f0.iter().enumerate() {
        let v = j.value();
        if v.im.abs() > 1e-9 || v.re < -1e-9 || v.re > 1.0 + 1e-9 {
            return Err(ModelError::BoundaryVectorInvalid {
                phase: i,
                re: v.re,
                im: v.im,
            });
        }
        boundary.push(v.re.max(0.0));
    }

    // Jets of f at z = 1 are linear in f(0): combine the basis runs. Only
    // the requested order is kept; the extra order existed for solvability.
    let jets_at_one: Vec<Jet> = (0..n)
        .map(|i| {
            let coeffs: Vec<Complex64> = (0..tol.jet_order + 1)
                .map(|k| {
                    (0..n)
                        .map(|b| f0[b].value() * basis_jets[b][k.min(order - 1)][i])
                        .sum()
                })
                .collect();
            Jet::from_coeffs(coeffs)
        })
        .collect();

    Ok(QueueSolution {
        n,
        lambda: sys.lambda(),
        load: rho,
        boundary,
        jets_at_one,
        roots,
    })
}

/// Evaluate `f(z)` at a point away from the determinant zeros by solving the
/// transposed linear system `(zI - A(z))^T f^T = (f(0) R(z))^T`.
pub fn evaluate_pgf(
    sys: &MarkedPgfSystem,
    qs: &QueueSolution,
    z: Complex64,
) -> Result<Vec<Complex64>, ModelError> {
    let jets = pgf_jets(sys, qs, z, 0)?;
    Ok(jets.iter().map(|j| j.value()).collect())
}

/// Jets of `f_i` at an expansion point `z0`. At `z0 = 1` the stored solve is
/// reused (the kernel is singular there); elsewhere the jet linear system is
/// solved directly, so any order is available.
pub fn pgf_jets(
    sys: &MarkedPgfSystem,
    qs: &QueueSolution,
    z0: Complex64,
    order: usize,
) -> Result<Vec<Jet>, ModelError> {
    let n = sys.n_phases();
    if (z0 - Complex64::new(1.0, 0.0)).norm() < 1e-12 {
        let stored = qs.jets_at_one[0].order();
        if order > stored {
            return Err(ModelError::Numerics(NumericsError::NonFinite(
                "jet order above the solved order at z = 1",
            )));
        }
        return Ok(qs.jets_at_one.iter().map(|j| j.truncated(order)).collect());
    }
    let zj = Jet::variable(z0, order);
    let kernel = sys.kernel(&zj)?;
    let rhs = sys.rhs(&zj)?;
    let kt = kernel.transpose();
    let zero = Jet::constant_at(Complex64::new(0.0, 0.0), order);
    let mut b = vec![zero; n];
    for (j, bj) in b.iter_mut().enumerate() {
        for i in 0..n {
            let term = rhs
                .get(i, j)
                .scale(Complex64::new(qs.boundary()[i], 0.0));
            *bj = &*bj + &term;
        }
    }
    let sol = solve_linear(&kt, &b, sys.tolerances())?;
    Ok(sol)
}
