//! One-vs-one RBF-kernel support vector machines.
//!
//! Binary machines are trained by sequential minimal optimization with
//! maximal-violating-pair working-set selection; multi-class models run a
//! stratified cross-validated grid search over (C, γ), retrain each class
//! pair on the winning point, and predict by pairwise voting. All selection
//! and tie-breaking rules are deterministic given the training seed.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::GridSpec;
use crate::error::{Error, Result};
use crate::features::{PruneMask, Scaler};

/// Tolerance at which a solved machine is audited: every first-order
/// optimality condition must hold within this bound.
pub const KKT_TOLERANCE: f64 = 1e-3;
/// Tolerance at which the solver actually stops iterating. Tighter than the
/// audit bound on purpose: stopping at the audit tolerance leaves the dual
/// objective ~1e-5 short of the true optimum on small problems, while this
/// stop keeps it within 1e-6 (and trivially satisfies the audit).
pub const STOP_TOLERANCE: f64 = 1e-6;
/// Safety cap on solver iterations; hitting it is a training error.
pub const MAX_SMO_ITERATIONS: u64 = 10_000_000;
/// Floor for the quadratic term of a two-variable subproblem.
const TAU: f64 = 1e-12;

/// RBF kernel value between two rows.
#[inline]
pub fn rbf_kernel(gamma: f64, u: &[f64], v: &[f64]) -> f64 {
    (-gamma * squared_distance(u, v)).exp()
}

#[inline]
fn squared_distance(u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Dense symmetric matrix of pairwise squared distances, row-major.
fn squared_distance_matrix(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    let mut d2 = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = squared_distance(&rows[i], &rows[j]);
            d2[i * n + j] = d;
            d2[j * n + i] = d;
        }
    }
    d2
}

/// One trained binary machine. The decision function is
/// `f(x) = Σ coefficients[i] · K(support_vectors[i], x) + bias`, positive for
/// the first class of the pair.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvm {
    /// Support vectors in the scaled, pruned feature space.
    pub support_vectors: Vec<Vec<f64>>,
    /// `α_i · y_i` per support vector.
    pub coefficients: Vec<f64>,
    pub bias: f64,
}

impl BinarySvm {
    pub fn decision(&self, gamma: f64, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.coefficients)
            .map(|(sv, &c)| c * rbf_kernel(gamma, sv, x))
            .sum::<f64>()
            + self.bias
    }
}

/// Full solver output for one binary problem, including the dual variables
/// needed for optimality audits.
#[derive(Debug, Clone)]
pub struct BinaryTraining {
    pub svm: BinarySvm,
    /// Dual variable per training row (including zeros).
    pub alpha: Vec<f64>,
    pub iterations: u64,
    /// Final maximal KKT violation (below [`KKT_TOLERANCE`] on success).
    pub gap: f64,
    /// Value of the maximized dual objective.
    pub dual_objective: f64,
}

struct SmoSolution {
    alpha: Vec<f64>,
    bias: f64,
    iterations: u64,
    gap: f64,
    dual_objective: f64,
}

/// Solve one binary problem on a precomputed kernel matrix (`n × n`,
/// row-major). Labels must be ±1 with at least one example per sign.
fn solve_smo(kernel: &[f64], n: usize, y: &[f64], c: f64) -> Result<SmoSolution> {
    debug_assert_eq!(kernel.len(), n * n);
    debug_assert_eq!(y.len(), n);
    let q = |i: usize, j: usize| y[i] * y[j] * kernel[i * n + j];

    let mut alpha = vec![0.0f64; n];
    // Gradient of the minimized objective ½αᵀQα − Σα.
    let mut grad = vec![-1.0f64; n];
    let mut iterations = 0u64;

    loop {
        // Maximal violating pair over the feasible ascent/descent sets.
        let mut i = usize::MAX;
        let mut m = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut mm = f64::INFINITY;
        for t in 0..n {
            let score = -y[t] * grad[t];
            let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c);
            if in_up && score > m {
                m = score;
                i = t;
            }
            if in_low && score < mm {
                mm = score;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX {
            return Err(Error::training(
                "working-set selection found no feasible direction; labels degenerate",
            ));
        }
        let gap = m - mm;
        if gap < STOP_TOLERANCE {
            let bias = (m + mm) / 2.0;
            let dual_objective = alpha
                .iter()
                .zip(&grad)
                .map(|(&a, &g)| 0.5 * a * (1.0 - g))
                .sum();
            return Ok(SmoSolution {
                alpha,
                bias,
                iterations,
                gap,
                dual_objective,
            });
        }
        if iterations >= MAX_SMO_ITERATIONS {
            return Err(Error::training(format!(
                "solver did not converge after {iterations} iterations \
                 (violation {gap:.3e}, tolerance {STOP_TOLERANCE:.0e}, {n} examples, C={c})"
            )));
        }
        iterations += 1;

        // Two-variable analytic update on (i, j), keeping Σ α y constant and
        // both variables in [0, C].
        let old_i = alpha[i];
        let old_j = alpha[j];
        if y[i] != y[j] {
            let mut quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let delta_i = alpha[i] - old_i;
        let delta_j = alpha[j] - old_j;
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(t, i) * delta_i + q(t, j) * delta_j;
        }
    }
}

fn validate_binary_labels(y: &[f64]) -> Result<()> {
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::training("binary labels must be ±1"));
    }
    let pos = y.iter().filter(|&&v| v > 0.0).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::training("need at least one example per sign"));
    }
    Ok(())
}

/// Train one binary machine with labels ±1.
pub fn train_binary(rows: &[Vec<f64>], y: &[f64], c: f64, gamma: f64) -> Result<BinaryTraining> {
    if rows.len() != y.len() {
        return Err(Error::training("rows and labels differ in length"));
    }
    validate_binary_labels(y)?;
    let n = rows.len();
    let d2 = squared_distance_matrix(rows);
    let kernel: Vec<f64> = d2.iter().map(|&d| (-gamma * d).exp()).collect();
    let sol = solve_smo(&kernel, n, y, c)?;
    Ok(binary_training_from(rows, y, sol))
}

fn binary_training_from(rows: &[Vec<f64>], y: &[f64], sol: SmoSolution) -> BinaryTraining {
    let mut support_vectors = Vec::new();
    let mut coefficients = Vec::new();
    for (t, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            support_vectors.push(rows[t].clone());
            coefficients.push(a * y[t]);
        }
    }
    BinaryTraining {
        svm: BinarySvm {
            support_vectors,
            coefficients,
            bias: sol.bias,
        },
        alpha: sol.alpha,
        iterations: sol.iterations,
        gap: sol.gap,
        dual_objective: sol.dual_objective,
    }
}

/// Result of auditing one solved binary problem against the first-order
/// optimality conditions.
#[derive(Debug, Clone, Copy)]
pub struct KktCheck {
    /// Worst violation of the per-point margin conditions.
    pub max_violation: f64,
    /// `|Σ α_i y_i|`.
    pub equality_residual: f64,
}

impl KktCheck {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_violation <= tolerance && self.equality_residual <= 1e-6
    }
}

/// Audit a solved binary problem: margins must satisfy
/// `y·f(x) ≥ 1` where `α = 0`, `= 1` where `0 < α < C`, and `≤ 1` where
/// `α = C`, each up to the reported violation.
pub fn kkt_audit(
    rows: &[Vec<f64>],
    y: &[f64],
    training: &BinaryTraining,
    c: f64,
    gamma: f64,
) -> KktCheck {
    let mut max_violation = 0.0f64;
    for (t, row) in rows.iter().enumerate() {
        let margin = y[t] * training.svm.decision(gamma, row);
        let a = training.alpha[t];
        let violation = if a <= 0.0 {
            1.0 - margin
        } else if a >= c {
            margin - 1.0
        } else {
            (margin - 1.0).abs()
        };
        max_violation = max_violation.max(violation);
    }
    let equality_residual = training
        .alpha
        .iter()
        .zip(y)
        .map(|(&a, &yy)| a * yy)
        .sum::<f64>()
        .abs();
    KktCheck {
        max_violation: max_violation.max(0.0),
        equality_residual,
    }
}

/// Ordered class pairs `(a, b)` with `a < b`.
pub fn class_pairs(n_classes: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(n_classes * (n_classes - 1) / 2);
    for a in 0..n_classes {
        for b in (a + 1)..n_classes {
            pairs.push((a, b));
        }
    }
    pairs
}

/// One pairwise machine inside a multi-class model; `a` is the positive
/// class of the decision function.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMachine {
    pub a: usize,
    pub b: usize,
    pub svm: BinarySvm,
}

/// Multi-class one-vs-one model. Prediction input is a pruned (but not yet
/// scaled) feature row; scaling happens inside with the stored bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    /// Ordered class labels; machine indices refer to this ordering.
    pub classes: Vec<String>,
    pub c: f64,
    pub gamma: f64,
    pub machines: Vec<PairMachine>,
    pub scaler: Scaler,
    pub prune: PruneMask,
    /// Pooling group size the feature rows were built with (0 = whole page).
    pub np: u32,
    /// Hash of the feature configuration the model was trained under.
    pub feature_config_hash: String,
}

/// Signed decision value of one pairwise machine, positive for class `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairDecision {
    pub a: usize,
    pub b: usize,
    pub value: f64,
}

impl SvmModel {
    fn scale_input(&self, pruned_row: &[f64]) -> Result<Vec<f64>> {
        if pruned_row.len() != self.scaler.dim() {
            return Err(Error::data(format!(
                "feature row has {} dims but the model expects {}",
                pruned_row.len(),
                self.scaler.dim()
            )));
        }
        self.scaler.transform(pruned_row)
    }

    /// Signed decision values of all pairwise machines for one row.
    pub fn pairwise_decisions(&self, pruned_row: &[f64]) -> Result<Vec<PairDecision>> {
        let x = self.scale_input(pruned_row)?;
        Ok(self
            .machines
            .iter()
            .map(|m| PairDecision {
                a: m.a,
                b: m.b,
                value: m.svm.decision(self.gamma, &x),
            })
            .collect())
    }

    /// Predicted class index for one pruned feature row.
    pub fn predict_index(&self, pruned_row: &[f64]) -> Result<usize> {
        let decisions = self.pairwise_decisions(pruned_row)?;
        Ok(vote_from_decisions(self.classes.len(), &decisions))
    }

    /// Predicted class label for one pruned feature row.
    pub fn predict(&self, pruned_row: &[f64]) -> Result<&str> {
        Ok(&self.classes[self.predict_index(pruned_row)?])
    }
}

/// Pairwise-vote rule: most votes wins; ties go to the tied class with the
/// greatest summed signed decision value over its machines; exact sum ties
/// fall back to the lowest class index.
pub(crate) fn vote_from_decisions(n_classes: usize, decisions: &[PairDecision]) -> usize {
    let mut votes = vec![0usize; n_classes];
    let mut margin = vec![0.0f64; n_classes];
    for d in decisions {
        if d.value > 0.0 {
            votes[d.a] += 1;
        } else {
            votes[d.b] += 1;
        }
        margin[d.a] += d.value;
        margin[d.b] -= d.value;
    }
    let top = *votes.iter().max().expect("at least one class");
    let mut best: Option<usize> = None;
    for t in 0..n_classes {
        if votes[t] == top {
            let better = match best {
                None => true,
                Some(current) => margin[t] > margin[current],
            };
            if better {
                best = Some(t);
            }
        }
    }
    best.expect("vote produced a winner")
}

/// Modal label of a page's per-group predictions; ties resolve to the label
/// of the earliest group (lowest ordinal) among the tied labels.
pub fn page_vote<T: Eq + Clone>(labels: &[T]) -> Result<T> {
    if labels.is_empty() {
        return Err(Error::data("cannot vote on an empty label list"));
    }
    let mut tally: Vec<(&T, usize)> = Vec::new();
    for label in labels {
        match tally.iter_mut().find(|(l, _)| *l == label) {
            Some((_, count)) => *count += 1,
            None => tally.push((label, 1)),
        }
    }
    let top = tally.iter().map(|&(_, c)| c).max().unwrap();
    let winner = labels
        .iter()
        .find(|l| tally.iter().any(|&(t, c)| c == top && t == *l))
        .unwrap();
    Ok(winner.clone())
}

/// One grid point's cross-validation outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvCell {
    pub log2_c: i32,
    pub log2_gamma: i32,
    pub c: f64,
    pub gamma: f64,
    pub mean_accuracy: f64,
}

/// Solver diagnostics for one final pairwise machine.
#[derive(Debug, Clone)]
pub struct MachineReport {
    pub a: usize,
    pub b: usize,
    pub support_count: usize,
    pub iterations: u64,
    pub gap: f64,
    pub dual_objective: f64,
    pub kkt: KktCheck,
}

/// Everything produced by multi-class training.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: SvmModel,
    pub best: CvCell,
    pub cv_table: Vec<CvCell>,
    pub reports: Vec<MachineReport>,
}

/// Stratified fold assignment: per class, indices are shuffled with the
/// seeded generator and dealt round-robin across folds.
pub(crate) fn assign_folds(
    labels: &[usize],
    n_classes: usize,
    folds: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; labels.len()];
    for class in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < folds {
            return Err(Error::training(format!(
                "class index {class} has {} rows but cross-validation needs at least {folds}",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for (pos, &row) in members.iter().enumerate() {
            fold_of[row] = pos % folds;
        }
    }
    Ok(fold_of)
}

/// Gathered binary subproblem over global row indices.
struct PairProblem {
    rows: Vec<usize>,
    y: Vec<f64>,
}

fn pair_problem(
    labels: &[usize],
    fold_of: &[usize],
    exclude_fold: Option<usize>,
    a: usize,
    b: usize,
) -> PairProblem {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (i, &label) in labels.iter().enumerate() {
        if exclude_fold == Some(fold_of[i]) {
            continue;
        }
        if label == a {
            rows.push(i);
            y.push(1.0);
        } else if label == b {
            rows.push(i);
            y.push(-1.0);
        }
    }
    PairProblem { rows, y }
}

/// Solve one gathered subproblem against the full kernel matrix.
fn solve_pair(
    problem: &PairProblem,
    kernel_full: &[f64],
    n_total: usize,
    c: f64,
) -> Result<(SmoSolution, Vec<usize>)> {
    let n = problem.rows.len();
    let mut local = vec![0.0f64; n * n];
    for (li, &gi) in problem.rows.iter().enumerate() {
        for (lj, &gj) in problem.rows.iter().enumerate() {
            local[li * n + lj] = kernel_full[gi * n_total + gj];
        }
    }
    let sol = solve_smo(&local, n, &problem.y, c)?;
    let sv_rows: Vec<usize> = problem
        .rows
        .iter()
        .zip(&sol.alpha)
        .filter(|(_, &a)| a > 0.0)
        .map(|(&g, _)| g)
        .collect();
    Ok((sol, sv_rows))
}

struct IndexedMachine {
    a: usize,
    b: usize,
    sv_rows: Vec<usize>,
    coef: Vec<f64>,
    bias: f64,
}

fn indexed_machine(
    problem: &PairProblem,
    sol: &SmoSolution,
    sv_rows: Vec<usize>,
    a: usize,
    b: usize,
) -> IndexedMachine {
    let coef: Vec<f64> = problem
        .rows
        .iter()
        .zip(&sol.alpha)
        .zip(&problem.y)
        .filter(|((_, &alpha), _)| alpha > 0.0)
        .map(|((_, &alpha), &y)| alpha * y)
        .collect();
    IndexedMachine {
        a,
        b,
        sv_rows,
        coef,
        bias: sol.bias,
    }
}

fn indexed_decision(m: &IndexedMachine, kernel_full: &[f64], n_total: usize, row: usize) -> f64 {
    m.sv_rows
        .iter()
        .zip(&m.coef)
        .map(|(&sv, &c)| c * kernel_full[row * n_total + sv])
        .sum::<f64>()
        + m.bias
}

/// Train a one-vs-one model: scale features to [0,1] on the training bounds,
/// grid-search (C, γ) by stratified cross-validation (ties prefer smaller C,
/// then smaller γ), then retrain every class pair on all rows at the winning
/// point. `rows` are pruned, unscaled feature rows; `labels` index into
/// `classes`. The prune mask, pooling size, and feature-config hash are
/// carried into the model for test-time checks.
#[allow(clippy::too_many_arguments)]
pub fn train_ovo(
    rows: &[Vec<f64>],
    labels: &[usize],
    classes: &[String],
    grid: &GridSpec,
    seed: u64,
    prune: PruneMask,
    np: u32,
    feature_config_hash: String,
) -> Result<TrainOutcome> {
    if rows.len() != labels.len() {
        return Err(Error::training("rows and labels differ in length"));
    }
    if let Some(row) = rows.first() {
        if row.len() != prune.kept_dim() {
            return Err(Error::training(format!(
                "training rows have {} dims but the prune mask keeps {}; \
                 rows must be pruned before training",
                row.len(),
                prune.kept_dim()
            )));
        }
    }
    let n_classes = classes.len();
    if n_classes < 2 {
        return Err(Error::training("training needs at least two classes"));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::training(format!(
            "label index {bad} out of range for {n_classes} classes"
        )));
    }
    grid.validate()?;

    let scaler = Scaler::fit(rows)?;
    let scaled = scaler.transform_all(rows)?;
    let n = scaled.len();
    let d2 = squared_distance_matrix(&scaled);
    let fold_of = assign_folds(labels, n_classes, grid.folds, seed)?;
    let pairs = class_pairs(n_classes);
    let c_values = grid.c_values();
    let gamma_values = grid.gamma_values();

    // Grid search: one kernel matrix per γ, shared across folds, pairs, and
    // C values; fold accuracies reduce to a deterministic per-point mean.
    let per_gamma: Vec<Vec<f64>> = gamma_values
        .par_iter()
        .map(|&gamma| -> Result<Vec<f64>> {
            let kernel: Vec<f64> = d2.iter().map(|&d| (-gamma * d).exp()).collect();
            let mut fold_hits = vec![vec![0usize; grid.folds]; c_values.len()];
            let mut fold_sizes = vec![0usize; grid.folds];
            for fold in 0..grid.folds {
                let problems: Vec<PairProblem> = pairs
                    .iter()
                    .map(|&(a, b)| pair_problem(labels, &fold_of, Some(fold), a, b))
                    .collect();
                let validation: Vec<usize> = (0..n).filter(|&i| fold_of[i] == fold).collect();
                fold_sizes[fold] = validation.len();
                for (ci, &c) in c_values.iter().enumerate() {
                    let machines: Vec<IndexedMachine> = problems
                        .iter()
                        .zip(&pairs)
                        .map(|(p, &(a, b))| {
                            let (sol, sv) = solve_pair(p, &kernel, n, c)?;
                            Ok(indexed_machine(p, &sol, sv, a, b))
                        })
                        .collect::<Result<_>>()?;
                    let hits = validation
                        .iter()
                        .filter(|&&row| {
                            let decisions: Vec<PairDecision> = machines
                                .iter()
                                .map(|m| PairDecision {
                                    a: m.a,
                                    b: m.b,
                                    value: indexed_decision(m, &kernel, n, row),
                                })
                                .collect();
                            vote_from_decisions(n_classes, &decisions) == labels[row]
                        })
                        .count();
                    fold_hits[ci][fold] = hits;
                }
            }
            Ok(c_values
                .iter()
                .enumerate()
                .map(|(ci, _)| {
                    let mut acc = 0.0;
                    for fold in 0..grid.folds {
                        if fold_sizes[fold] > 0 {
                            acc += fold_hits[ci][fold] as f64 / fold_sizes[fold] as f64;
                        }
                    }
                    acc / grid.folds as f64
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    // Deterministic selection: scan C-major then γ; strict improvement keeps
    // the smaller C, then the smaller γ, on ties.
    let mut cv_table = Vec::with_capacity(c_values.len() * gamma_values.len());
    let mut best: Option<CvCell> = None;
    for (ci, &c) in c_values.iter().enumerate() {
        for (gi, &gamma) in gamma_values.iter().enumerate() {
            let cell = CvCell {
                log2_c: grid.log2_c_min + 2 * ci as i32,
                log2_gamma: grid.log2_gamma_min + 2 * gi as i32,
                c,
                gamma,
                mean_accuracy: per_gamma[gi][ci],
            };
            cv_table.push(cell);
            if best.is_none_or(|b| cell.mean_accuracy > b.mean_accuracy) {
                best = Some(cell);
            }
        }
    }
    let best = best.expect("validated grid is nonempty");

    // Final machines on all rows at the winning point.
    let kernel: Vec<f64> = d2.iter().map(|&d| (-best.gamma * d).exp()).collect();
    let trained: Vec<(PairMachine, MachineReport)> = pairs
        .par_iter()
        .map(|&(a, b)| -> Result<(PairMachine, MachineReport)> {
            let problem = pair_problem(labels, &fold_of, None, a, b);
            let (sol, _) = solve_pair(&problem, &kernel, n, best.c)?;
            let rows_local: Vec<Vec<f64>> =
                problem.rows.iter().map(|&g| scaled[g].clone()).collect();
            let training = binary_training_from(&rows_local, &problem.y, sol);
            let kkt = kkt_audit(&rows_local, &problem.y, &training, best.c, best.gamma);
            let report = MachineReport {
                a,
                b,
                support_count: training.svm.support_vectors.len(),
                iterations: training.iterations,
                gap: training.gap,
                dual_objective: training.dual_objective,
                kkt,
            };
            Ok((
                PairMachine {
                    a,
                    b,
                    svm: training.svm,
                },
                report,
            ))
        })
        .collect::<Result<_>>()?;

    let (machines, reports): (Vec<_>, Vec<_>) = trained.into_iter().unzip();
    Ok(TrainOutcome {
        model: SvmModel {
            classes: classes.to_vec(),
            c: best.c,
            gamma: best.gamma,
            machines,
            scaler,
            prune,
            np,
            feature_config_hash,
        },
        best,
        cv_table,
        reports,
    })
}
