//! Factorization of a long sequence into a convolution of short real filters
//! through the roots of its polynomial symbol `W̃(z) = Σ_j W_j z^j`.

use nalgebra::linalg::Schur;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::seqconv::{convolve_all, FilterSeq};

/// Relative residual accepted for a computed root.
pub const TOL_ROOT: f64 = 1e-10;
/// Iteration cap of the simultaneous root iteration.
pub const MAX_ROOT_ITERS: usize = 500;
/// Tolerance used to match a complex root with its conjugate.
pub const TOL_CONJ: f64 = 1e-7;
/// Largest symbol degree accepted by [`factor_sequence`].
pub const MAX_DEGREE: usize = 4096;
/// Largest degree for which the companion matrix is formed explicitly.
const COMPANION_DIRECT: usize = 64;
const COMPANION_SEED: usize = 512;

/// Filters whose ordered convolution reproduces a target sequence.
#[derive(Clone, Debug)]
pub struct FactorizationResult {
    /// Filters in application order, each of length at most `s + 1`.
    pub filters: Vec<FilterSeq>,
    /// Length of the (untrimmed) target sequence.
    pub target_len: usize,
    /// Largest absolute entrywise reconstruction error.
    pub residual: f64,
}

fn horner(c: &[f64], z: Complex64) -> Complex64 {
    c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a)
}

fn horner_abs(c: &[f64], r: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * r + a.abs())
}

/// Residual of `z` as a root of `c`, relative to the size of the terms summed.
fn relative_residual(c: &[f64], z: Complex64) -> f64 {
    let scale = horner_abs(c, z.norm()).max(f64::MIN_POSITIVE);
    horner(c, z).norm() / scale
}

fn companion_eigenvalues(c: &[f64]) -> Option<Vec<Complex64>> {
    let n = c.len() - 1;
    let lead = c[n];
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        m[(i, n - 1)] = -c[i] / lead;
    }
    let schur = Schur::try_new(m, f64::EPSILON, 200 * n)?;
    Some(schur.complex_eigenvalues().iter().copied().collect())
}

fn newton_polish(c: &[f64], z: Complex64) -> Complex64 {
    let dc: Vec<f64> = c.iter().enumerate().skip(1).map(|(k, &a)| k as f64 * a).collect();
    let mut z = z;
    let mut best = (relative_residual(c, z), z);
    for _ in 0..8 {
        let d = horner(&dc, z);
        if d.norm() == 0.0 {
            break;
        }
        z -= horner(c, z) / d;
        let r = relative_residual(c, z);
        if !r.is_finite() {
            break;
        }
        if r < best.0 {
            best = (r, z);
        }
    }
    best.1
}

/// Simultaneous (Durand–Kerner) iteration from the given seeds.
fn durand_kerner(c: &[f64], mut z: Vec<Complex64>) -> (Vec<Complex64>, f64) {
    let lead = *c.last().unwrap();
    let worst = |z: &[Complex64]| z.iter().map(|&r| relative_residual(c, r)).fold(0.0, f64::max);
    let mut res = worst(&z);
    for _ in 0..MAX_ROOT_ITERS {
        if res <= TOL_ROOT * 1e-3 {
            break;
        }
        for i in 0..z.len() {
            let mut den = Complex64::new(lead, 0.0);
            for j in 0..z.len() {
                if i != j {
                    den *= z[i] - z[j];
                }
            }
            if den.norm() > 0.0 {
                let step = horner(c, z[i]) / den;
                z[i] -= step;
            }
        }
        res = worst(&z);
    }
    (z, res)
}

fn circle_seeds(c: &[f64]) -> Vec<Complex64> {
    let n = c.len() - 1;
    let radius = (c[0].abs() / c[n].abs()).powf(1.0 / n as f64).max(1e-3);
    (0..n)
        .map(|k| Complex64::from_polar(radius, 0.4 + 2.0 * std::f64::consts::PI * k as f64 / n as f64))
        .collect()
}

/// All roots (with multiplicity) of `Σ_j c_j z^j`.
///
/// Companion-matrix eigenvalues polished by Newton steps up to degree 64,
/// simultaneous iteration above that (seeded from the companion matrix while
/// that is affordable). Each root satisfies
/// `|p(r)| ≤ TOL_ROOT · Σ_k |c_k| |r|^k`, which reduces to the plain
/// `TOL_ROOT · ‖c‖₁` criterion on the unit disc.
pub fn find_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let mut c: Vec<f64> = coeffs.to_vec();
    while c.len() > 1 && *c.last().unwrap() == 0.0 {
        c.pop();
    }
    if c.len() < 2 {
        return Err(Error::invalid("root finding needs a polynomial of degree at least 1"));
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("polynomial coefficients must be finite"));
    }
    let zeros = c.iter().take_while(|&&v| v == 0.0).count();
    let c = c.split_off(zeros);
    let mut roots = vec![Complex64::new(0.0, 0.0); zeros];
    let n = c.len() - 1;
    if n == 0 {
        return Ok(roots);
    }
    if n == 1 {
        roots.push(Complex64::new(-c[0] / c[1], 0.0));
        return Ok(roots);
    }
    let eig = if n <= COMPANION_SEED { companion_eigenvalues(&c) } else { None };
    let direct = eig.is_some() && n <= COMPANION_DIRECT;
    let mut z = eig.unwrap_or_else(|| circle_seeds(&c));
    if direct {
        z = z.into_iter().map(|r| newton_polish(&c, r)).collect();
    }
    let worst = z.iter().map(|&r| relative_residual(&c, r)).fold(0.0, f64::max);
    if worst > TOL_ROOT || !direct {
        let (zz, res) = durand_kerner(&c, z);
        if !(res <= TOL_ROOT) {
            return Err(Error::numerical(format!(
                "root finding did not converge in {MAX_ROOT_ITERS} iterations (best relative residual {res:.3e})"
            )));
        }
        z = zz.into_iter().map(|r| newton_polish(&c, r)).collect();
    }
    roots.extend(z);
    Ok(roots)
}

/// A real factor of the symbol: a real root or a conjugate pair.
#[derive(Clone, Copy, Debug)]
enum Unit {
    Real(f64),
    Pair(Complex64),
}

impl Unit {
    fn degree(&self) -> usize {
        match self {
            Unit::Real(_) => 1,
            Unit::Pair(_) => 2,
        }
    }

    fn point(&self) -> Complex64 {
        match *self {
            Unit::Real(r) => Complex64::new(r, 0.0),
            Unit::Pair(z) => z,
        }
    }

    /// Monic coefficients, lowest degree first.
    fn coeffs(&self) -> Vec<f64> {
        match *self {
            Unit::Real(r) => vec![-r, 1.0],
            Unit::Pair(z) => vec![z.norm_sqr(), -2.0 * z.re, 1.0],
        }
    }
}

/// Matches complex roots with their conjugates; real roots stay single.
fn pair_roots(roots: &[Complex64]) -> Result<Vec<Unit>> {
    let mut sorted = roots.to_vec();
    sorted.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut units = Vec::new();
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for z in sorted {
        if z.im.abs() <= TOL_CONJ * z.norm().max(1.0) {
            units.push(Unit::Real(z.re));
        } else if z.im > 0.0 {
            upper.push(z);
        } else {
            lower.push(z);
        }
    }
    if upper.len() != lower.len() {
        return Err(Error::numerical("complex roots do not come in conjugate pairs"));
    }
    let mut used = vec![false; lower.len()];
    for z in upper {
        let (j, dist) = lower
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, w)| (j, (z - w.conj()).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("balanced lists");
        if dist > TOL_CONJ * z.norm().max(1.0) {
            return Err(Error::numerical(format!("no conjugate found for root {z} (gap {dist:.3e})")));
        }
        used[j] = true;
        let mid = 0.5 * (z + lower[j].conj());
        units.push(Unit::Pair(mid));
    }
    Ok(units)
}

/// Greedy Leja ordering: each next point maximizes the product of distances
/// to the points (and conjugates) already chosen. Keeps partial products of
/// the factors well scaled.
fn leja_order(units: Vec<Unit>) -> Vec<Unit> {
    let n = units.len();
    if n <= 1 {
        return units;
    }
    let pts: Vec<Complex64> = units.iter().map(Unit::point).collect();
    let mut score = vec![0.0f64; n];
    let mut used = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut next = (0..n).max_by(|&a, &b| pts[a].norm().total_cmp(&pts[b].norm()).then(b.cmp(&a))).unwrap();
    for step in 0..n {
        if step > 0 {
            next = (0..n)
                .filter(|&i| !used[i])
                .max_by(|&a, &b| score[a].total_cmp(&score[b]).then(b.cmp(&a)))
                .unwrap();
        }
        used[next] = true;
        order.push(units[next]);
        let p = pts[next];
        for i in 0..n {
            if !used[i] {
                score[i] += ((pts[i] - p).norm() + 1e-300).ln() + ((pts[i] - p.conj()).norm() + 1e-300).ln();
            }
        }
    }
    order
}

/// Packs units into filters of degree at most `s`, taking units in order but
/// letting a later real root fill a slot a pair cannot. Every filter except
/// possibly the last has degree `s` or `s - 1`.
fn group_units(units: Vec<Unit>, s: usize) -> Vec<Vec<f64>> {
    let mut queue: Vec<Option<Unit>> = units.into_iter().map(Some).collect();
    let mut filters = Vec::new();
    let mut remaining = queue.len();
    while remaining > 0 {
        let mut cap = s;
        let mut f = vec![1.0];
        for slot in queue.iter_mut() {
            if cap == 0 {
                break;
            }
            if let Some(u) = slot {
                if u.degree() <= cap {
                    cap -= u.degree();
                    f = crate::seqconv::convolve_slices(&f, &u.coeffs());
                    *slot = None;
                    remaining -= 1;
                }
            }
        }
        filters.push(f);
    }
    filters
}

fn finish(filters: Vec<FilterSeq>, target: &[f64], s: usize, pad_to: Option<usize>) -> Result<FactorizationResult> {
    let mut filters = filters;
    let degree = target.len() - 1;
    let bound = ceil_div(degree, s - 1).max(1);
    if filters.len() > bound {
        return Err(Error::numerical(format!("grouping produced {} filters, more than {bound}", filters.len())));
    }
    if let Some(p) = pad_to {
        if p < filters.len() || p < ceil_div(degree, s - 1) {
            return Err(Error::invalid(format!("pad_to = {p} is smaller than the {bound} filters required")));
        }
        filters.resize(p, FilterSeq::delta());
    }
    let rebuilt = convolve_all(&filters);
    let residual = (0..target.len().max(rebuilt.len()))
        .map(|i| (rebuilt.at(i as isize) - target.get(i).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max);
    Ok(FactorizationResult { filters, target_len: target.len(), residual })
}

pub(crate) fn ceil_div(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

/// Factors `W` into filters supported in `{0, …, s}` whose ordered convolution
/// reproduces `W`. At most `⌈deg W/(s−1)⌉` filters are produced; with
/// `pad_to`, delta filters are appended up to exactly that many. The leading
/// coefficient of `W̃` is carried by the first filter; the others are monic.
pub fn factor_sequence(w: &FilterSeq, s: usize, pad_to: Option<usize>) -> Result<FactorizationResult> {
    if s < 2 {
        return Err(Error::invalid("filter support s must be at least 2"));
    }
    let target = w.trimmed();
    let degree = target.degree();
    if degree > MAX_DEGREE {
        return Err(Error::invalid(format!("symbol degree {degree} exceeds the cap of {MAX_DEGREE}")));
    }
    if degree <= s {
        return finish(vec![target.clone()], target.coeffs(), s, pad_to);
    }
    let roots = find_roots(target.coeffs())?;
    let units = leja_order(pair_roots(&roots)?);
    let lead = *target.coeffs().last().unwrap();
    let filters = build_filters(units, s, lead)?;
    finish(filters, target.coeffs(), s, pad_to)
}

fn build_filters(units: Vec<Unit>, s: usize, lead: f64) -> Result<Vec<FilterSeq>> {
    let mut groups = group_units(units, s);
    if let Some(first) = groups.first_mut() {
        first.iter_mut().for_each(|v| *v *= lead);
    }
    groups.into_iter().map(FilterSeq::new).collect()
}

/// Ones at multiples of `block_width`, `n_blocks` of them: the symbol
/// `Σ_{k<N} z^{kK}`. Requires odd `n_blocks`.
pub fn replication_sequence(block_width: usize, n_blocks: usize) -> Result<FilterSeq> {
    check_replication(block_width, n_blocks)?;
    let mut c = vec![0.0; (n_blocks - 1) * block_width + 1];
    for k in 0..n_blocks {
        c[k * block_width] = 1.0;
    }
    FilterSeq::new(c)
}

fn check_replication(block_width: usize, n_blocks: usize) -> Result<()> {
    if block_width == 0 {
        return Err(Error::invalid("block width must be positive"));
    }
    if n_blocks.is_multiple_of(2) {
        return Err(Error::invalid(format!("replication count N = {n_blocks} must be odd")));
    }
    Ok(())
}

/// Closed-form roots of the replication symbol: the `NK`-th roots of unity
/// `e^{2πi m/(NK)}` with `m` not a multiple of `N`.
pub fn replication_roots(block_width: usize, n_blocks: usize) -> Result<Vec<Complex64>> {
    check_replication(block_width, n_blocks)?;
    let total = block_width * n_blocks;
    Ok((1..total)
        .filter(|m| m % n_blocks != 0)
        .map(|m| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * m as f64 / total as f64))
        .collect())
}

/// Factorization of the replication sequence from its closed-form roots.
/// The symbol has no real roots for odd `N`, so every filter is a product of
/// conjugate-pair quadratics.
pub fn factor_replication(block_width: usize, n_blocks: usize, s: usize, pad_to: Option<usize>) -> Result<FactorizationResult> {
    if s < 2 {
        return Err(Error::invalid("filter support s must be at least 2"));
    }
    let target = replication_sequence(block_width, n_blocks)?;
    if target.degree() <= s {
        return finish(vec![target.clone()], target.coeffs(), s, pad_to);
    }
    let total = block_width * n_blocks;
    let units: Vec<Unit> = (1..total.div_ceil(2))
        .filter(|m| m % n_blocks != 0 && 2 * m < total)
        .map(|m| Unit::Pair(Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * m as f64 / total as f64)))
        .collect();
    let filters = build_filters(leja_order(units), s, 1.0)?;
    finish(filters, target.coeffs(), s, pad_to)
}
