//! Intensity optimization, distance sweeps and the symmetric-intensity
//! baseline comparison.
//!
//! The search is a real-coded genetic algorithm (tournament selection,
//! uniform crossover, Gaussian mutation clipped to the bounds) followed by an
//! optional golden-section polish along each coordinate and along the
//! intensity-scaling direction. Children of generation `g` at index `i` draw
//! from their own ChaCha8 stream, so results do not depend on the thread
//! pool.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::finite_key::{evaluate, RateBreakdown, SecurityParams, TestBits};
use crate::model::{ChannelParams, SourceParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub mu_bounds: (f64, f64),
    pub test_fraction_bounds: (f64, f64),
    /// Search the test fraction too; otherwise the one in `SecurityParams` is used.
    pub optimize_test_fraction: bool,
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    /// Per-gene mutation probability.
    pub mutation_rate: f64,
    /// Initial mutation σ as a fraction of each bound range.
    pub mutation_sigma: f64,
    /// Geometric decay of σ per generation.
    pub sigma_decay: f64,
    pub tournament: usize,
    pub elites: usize,
    pub rng_seed: u64,
    /// Force `mu_a = mu_b`.
    pub symmetric_constraint: bool,
    pub refine: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            mu_bounds: (1e-4, 0.499),
            test_fraction_bounds: (0.01, 0.5),
            optimize_test_fraction: false,
            population: 64,
            generations: 200,
            crossover_rate: 0.9,
            mutation_rate: 0.3,
            mutation_sigma: 0.1,
            sigma_decay: 0.98,
            tournament: 3,
            elites: 2,
            rng_seed: 0,
            symmetric_constraint: false,
            refine: true,
        }
    }
}

impl OptimizerConfig {
    pub fn symmetric(self) -> Self {
        Self {
            symmetric_constraint: true,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.mu_bounds;
        if !(lo > 0.0 && lo <= hi && hi < 1.0) {
            return Err(Error::InfeasibleBounds { name: "mu", lo, hi });
        }
        let (lo, hi) = self.test_fraction_bounds;
        if self.optimize_test_fraction && !(lo > 0.0 && lo <= hi && hi < 1.0) {
            return Err(Error::InfeasibleBounds {
                name: "test_fraction",
                lo,
                hi,
            });
        }
        if self.population < 4 {
            return Err(Error::Config(format!(
                "population must be at least 4, got {}",
                self.population
            )));
        }
        if self.tournament == 0 || self.elites >= self.population {
            return Err(Error::Config(
                "tournament must be >= 1 and elites < population".into(),
            ));
        }
        for (name, v) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain {
                    name,
                    value: v,
                    expected: "in [0, 1]",
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimResult {
    pub best_mu_a: f64,
    pub best_mu_b: f64,
    /// `None` when a fixed test-bit count was used.
    pub best_test_fraction: Option<f64>,
    pub best_rate: f64,
    /// `None` when the reported point could not be evaluated at all.
    pub breakdown: Option<RateBreakdown>,
    pub evaluations: usize,
    /// A point with positive rate was found.
    pub converged: bool,
}

/// The rate landscape over the search variables for one channel.
struct Objective<'a> {
    channel: &'a ChannelParams,
    security: &'a SecurityParams,
    symmetric: bool,
    with_test_fraction: bool,
    bounds: Vec<(f64, f64)>,
}

impl<'a> Objective<'a> {
    fn new(channel: &'a ChannelParams, security: &'a SecurityParams, oc: &OptimizerConfig) -> Self {
        let mut bounds = vec![oc.mu_bounds];
        if !oc.symmetric_constraint {
            bounds.push(oc.mu_bounds);
        }
        if oc.optimize_test_fraction {
            bounds.push(oc.test_fraction_bounds);
        }
        Self {
            channel,
            security,
            symmetric: oc.symmetric_constraint,
            with_test_fraction: oc.optimize_test_fraction,
            bounds,
        }
    }

    fn decode(&self, x: &[f64]) -> (SourceParams, SecurityParams) {
        let (mu_a, mu_b) = if self.symmetric {
            (x[0], x[0])
        } else {
            (x[0], x[1])
        };
        let mut sp = *self.security;
        if self.with_test_fraction {
            sp.test_bits = TestBits::Fraction(x[x.len() - 1]);
        }
        (SourceParams { mu_a, mu_b }, sp)
    }

    fn breakdown(&self, x: &[f64]) -> Option<RateBreakdown> {
        let (src, sp) = self.decode(x);
        evaluate(self.channel, &src, &sp).ok()
    }

    /// Rate, with unevaluable points scored 0.
    fn rate(&self, x: &[f64]) -> f64 {
        self.breakdown(x).map_or(0.0, |b| b.rate)
    }

    fn clip(&self, x: &mut [f64]) {
        for (v, &(lo, hi)) in x.iter_mut().zip(&self.bounds) {
            *v = v.clamp(lo, hi);
        }
    }

    /// Points on the curve `mu_a eta_a = mu_b eta_b`, where the interference
    /// is balanced and the QBER is lowest.
    fn matched_seeds(&self, count: usize) -> Vec<Vec<f64>> {
        let (Ok(eta_a), Ok(eta_b)) = (self.channel.eta_a(), self.channel.eta_b()) else {
            return Vec::new();
        };
        let (lo, hi) = self.bounds[0];
        (0..count)
            .map(|i| {
                let t = (i as f64 + 0.5) / count as f64;
                let scale = lo + t * (hi - lo);
                let mut x = if self.symmetric {
                    vec![scale]
                } else if eta_a >= eta_b {
                    vec![scale * eta_b / eta_a, scale]
                } else {
                    vec![scale, scale * eta_a / eta_b]
                };
                if self.with_test_fraction {
                    let (tlo, thi) = self.bounds[self.bounds.len() - 1];
                    x.push(self.security_fraction().clamp(tlo, thi));
                }
                self.clip(&mut x);
                x
            })
            .collect()
    }

    fn security_fraction(&self) -> f64 {
        match self.security.test_bits {
            TestBits::Fraction(f) => f,
            TestBits::Count(_) => 0.1,
        }
    }
}

fn stream_rng(seed: u64, generation: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 32) | index as u64);
    rng
}

struct Searcher<'a> {
    obj: &'a Objective<'a>,
    evaluations: usize,
}

impl Searcher<'_> {
    fn score_all(&mut self, pop: &[Vec<f64>]) -> Vec<f64> {
        self.evaluations += pop.len();
        pop.par_iter().map(|x| self.obj.rate(x)).collect()
    }

    fn score(&mut self, x: &[f64]) -> f64 {
        self.evaluations += 1;
        self.obj.rate(x)
    }

    fn genetic(&mut self, oc: &OptimizerConfig) -> (Vec<f64>, f64) {
        let dim = self.obj.bounds.len();
        let bounds = self.obj.bounds.clone();
        let seeds = self.obj.matched_seeds(oc.population / 8);
        let mut pop: Vec<Vec<f64>> = (0..oc.population)
            .map(|i| {
                seeds.get(i).cloned().unwrap_or_else(|| {
                    let mut rng = stream_rng(oc.rng_seed, 0, i);
                    bounds
                        .iter()
                        .map(|&(lo, hi)| rng.random_range(lo..=hi))
                        .collect()
                })
            })
            .collect();
        let mut fit = self.score_all(&pop);
        let mut best = best_of(&pop, &fit);
        let mut sigma = oc.mutation_sigma;

        for gen in 1..=oc.generations {
            let mut order: Vec<usize> = (0..pop.len()).collect();
            order.sort_by(|&a, &b| fit[b].total_cmp(&fit[a]).then(a.cmp(&b)));
            let mut next: Vec<Vec<f64>> =
                order[..oc.elites].iter().map(|&i| pop[i].clone()).collect();
            let children: Vec<Vec<f64>> = (oc.elites..oc.population)
                .into_par_iter()
                .map(|i| {
                    let mut rng = stream_rng(oc.rng_seed, gen, i);
                    let pa = tournament(&mut rng, &fit, oc.tournament);
                    let pb = tournament(&mut rng, &fit, oc.tournament);
                    let cross = rng.random::<f64>() < oc.crossover_rate;
                    let mut child: Vec<f64> = (0..dim)
                        .map(|d| {
                            if cross && rng.random::<bool>() {
                                pop[pb][d]
                            } else {
                                pop[pa][d]
                            }
                        })
                        .collect();
                    for (d, v) in child.iter_mut().enumerate() {
                        if rng.random::<f64>() < oc.mutation_rate {
                            let (lo, hi) = bounds[d];
                            let z: f64 = StandardNormal.sample(&mut rng);
                            *v = (*v + z * sigma * (hi - lo)).clamp(lo, hi);
                        }
                    }
                    child
                })
                .collect();
            next.extend(children);
            pop = next;
            fit = self.score_all(&pop);
            let cand = best_of(&pop, &fit);
            if cand.1 > best.1 {
                best = cand;
            }
            sigma *= oc.sigma_decay;
        }
        best
    }

    /// Golden-section search along `dir` from `x`, within the bounds.
    fn line_search(&mut self, x: &[f64], fx: f64, dir: &[f64]) -> (Vec<f64>, f64) {
        let (mut t_lo, mut t_hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for ((&v, &d), &(lo, hi)) in x.iter().zip(dir).zip(&self.obj.bounds) {
            if d > 0.0 {
                t_lo = t_lo.max((lo - v) / d);
                t_hi = t_hi.min((hi - v) / d);
            } else if d < 0.0 {
                t_lo = t_lo.max((hi - v) / d);
                t_hi = t_hi.min((lo - v) / d);
            }
        }
        if !(t_lo < t_hi) {
            return (x.to_vec(), fx);
        }
        let at = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = x.iter().zip(dir).map(|(v, d)| v + t * d).collect();
            self.obj.clip(&mut p);
            p
        };
        const INV_PHI: f64 = 0.618_033_988_749_894_8;
        let (mut a, mut b) = (t_lo, t_hi);
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let mut fc = self.score(&at(c));
        let mut fd = self.score(&at(d));
        for _ in 0..60 {
            if (b - a).abs() < 1e-12 {
                break;
            }
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = self.score(&at(c));
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = self.score(&at(d));
            }
        }
        let (t, ft) = if fc >= fd { (c, fc) } else { (d, fd) };
        if ft > fx {
            (at(t), ft)
        } else {
            (x.to_vec(), fx)
        }
    }

    fn polish(&mut self, mut x: Vec<f64>, mut fx: f64) -> (Vec<f64>, f64) {
        let dim = x.len();
        let mu_dims = if self.obj.symmetric { 1 } else { 2 };
        for _ in 0..4 {
            let before = fx;
            for axis in 0..dim {
                let mut dir = vec![0.0; dim];
                dir[axis] = 1.0;
                (x, fx) = self.line_search(&x, fx, &dir);
            }
            if mu_dims == 2 {
                // Scale both intensities together: follows the matched ridge.
                let mut dir = vec![0.0; dim];
                dir[0] = x[0];
                dir[1] = x[1];
                (x, fx) = self.line_search(&x, fx, &dir);
            }
            if fx <= before {
                break;
            }
        }
        (x, fx)
    }
}

fn tournament<R: Rng>(rng: &mut R, fit: &[f64], size: usize) -> usize {
    let mut best = rng.random_range(0..fit.len());
    for _ in 1..size {
        let c = rng.random_range(0..fit.len());
        if fit[c] > fit[best] || (fit[c] == fit[best] && c < best) {
            best = c;
        }
    }
    best
}

fn best_of(pop: &[Vec<f64>], fit: &[f64]) -> (Vec<f64>, f64) {
    let mut i_best = 0;
    for i in 1..pop.len() {
        if fit[i] > fit[i_best] {
            i_best = i;
        }
    }
    (pop[i_best].clone(), fit[i_best])
}

/// Maximizes the finite-key rate over the source intensities (and optionally
/// the test fraction) for one channel.
pub fn optimize_rate(
    ch: &ChannelParams,
    sp: &SecurityParams,
    oc: &OptimizerConfig,
) -> Result<OptimResult> {
    oc.validate()?;
    ch.validate()?;
    sp.validate()?;
    let obj = Objective::new(ch, sp, oc);
    let mut search = Searcher {
        obj: &obj,
        evaluations: 0,
    };
    let (mut x, mut fx) = search.genetic(oc);
    if oc.refine && fx > 0.0 {
        (x, fx) = search.polish(x, fx);
    }
    let breakdown = obj.breakdown(&x);
    let best_rate = breakdown.map_or(0.0, |b| b.rate);
    debug_assert_eq!(best_rate, fx);
    let (src, used) = obj.decode(&x);
    Ok(OptimResult {
        best_mu_a: src.mu_a,
        best_mu_b: src.mu_b,
        best_test_fraction: match used.test_bits {
            TestBits::Fraction(f) => Some(f),
            TestBits::Count(_) => None,
        },
        best_rate,
        breakdown,
        evaluations: search.evaluations + 1,
        converged: best_rate > 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub total_km: f64,
    pub delta_km: f64,
    pub channel: ChannelParams,
    pub result: OptimResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    /// Grid points that could not be evaluated, with the reason.
    pub skipped: Vec<(f64, String)>,
}

/// Optimizes every total distance `L` of `grid` with `l_b - l_a = delta`.
pub fn sweep_distance(
    template: &ChannelParams,
    delta_km: f64,
    grid: &[f64],
    sp: &SecurityParams,
    oc: &OptimizerConfig,
) -> Result<Sweep> {
    oc.validate()?;
    let outcomes: Vec<std::result::Result<SweepRow, (f64, String)>> = grid
        .par_iter()
        .map(|&total| {
            if !(total >= delta_km.abs()) {
                return Err((
                    total,
                    format!("L = {total} km is shorter than |delta| = {delta_km} km"),
                ));
            }
            let channel = ChannelParams {
                l_a: (total - delta_km) / 2.0,
                l_b: (total + delta_km) / 2.0,
                ..*template
            };
            optimize_rate(&channel, sp, oc)
                .map(|result| SweepRow {
                    total_km: total,
                    delta_km,
                    channel,
                    result,
                })
                .map_err(|e| (total, e.to_string()))
        })
        .collect();
    let mut sweep = Sweep {
        rows: Vec::new(),
        skipped: Vec::new(),
    };
    for o in outcomes {
        match o {
            Ok(row) => sweep.rows.push(row),
            Err(skip) => sweep.skipped.push(skip),
        }
    }
    Ok(sweep)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// Independent intensities.
    pub asymmetric: Sweep,
    /// Same rate formula constrained to `mu_a = mu_b`.
    pub baseline: Sweep,
    /// `(L, asymmetric / baseline)`, `None` where either rate is zero.
    pub ratios: Vec<(f64, Option<f64>)>,
    /// Largest ratio and the `L` where it occurs.
    pub max_ratio: Option<(f64, f64)>,
}

pub fn compare_protocols(
    template: &ChannelParams,
    delta_km: f64,
    grid: &[f64],
    sp: &SecurityParams,
    oc: &OptimizerConfig,
) -> Result<Comparison> {
    let free = OptimizerConfig {
        symmetric_constraint: false,
        ..*oc
    };
    let asymmetric = sweep_distance(template, delta_km, grid, sp, &free)?;
    let baseline = sweep_distance(template, delta_km, grid, sp, &oc.symmetric())?;
    let ratios: Vec<(f64, Option<f64>)> = asymmetric
        .rows
        .iter()
        .zip(&baseline.rows)
        .map(|(a, b)| {
            debug_assert_eq!(a.total_km, b.total_km);
            let r = (a.result.best_rate > 0.0 && b.result.best_rate > 0.0)
                .then(|| a.result.best_rate / b.result.best_rate);
            (a.total_km, r)
        })
        .collect();
    let max_ratio = ratios.iter().filter_map(|&(l, r)| r.map(|r| (l, r))).fold(
        None,
        |acc: Option<(f64, f64)>, (l, r)| match acc {
            Some((_, best)) if best >= r => acc,
            _ => Some((l, r)),
        },
    );
    Ok(Comparison {
        asymmetric,
        baseline,
        ratios,
        max_ratio,
    })
}

/// `start, start + step, ...` up to and including `end` (within 1e-9 step).
pub fn distance_grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(end >= start) {
        return Err(Error::Config(format!(
            "invalid grid: start {start}, end {end}, step {step}"
        )));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}
