//! SMO over the doubled variables `(α, α*)` with LIBSVM-style shrinking.
//!
//! The solver minimizes `½ aᵀQa + pᵀa` over `a = (α, α*)` with
//! `Q_tu = s_t s_u K`, signs `s = +1` on the α side and `-1` on the α* side,
//! `Σ s_t a_t = 0` and `0 ≤ a ≤ C`. Gradients are kept per side so the hot
//! loops are branch-light, and each gradient update also produces the next
//! maximal violating pair.

use crate::numerics::SymMatrix;

use super::{SvrConfig, WorkingSet};

/// Curvature floor for non-positive pair curvature (indefinite kernels).
const TAU: f64 = 1e-12;

pub(super) struct SmoOutput {
    pub beta: Vec<f64>,
    /// Decision function offset: `f(x) = Σβ K - rho`.
    pub rho: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Var {
    /// `α_p`, sign +1.
    A(usize),
    /// `α*_p`, sign -1.
    B(usize),
}

impl Var {
    fn point(self) -> usize {
        match self {
            Var::A(p) | Var::B(p) => p,
        }
    }

    fn sign(self) -> f64 {
        match self {
            Var::A(_) => 1.0,
            Var::B(_) => -1.0,
        }
    }
}

#[derive(Debug, Default, Clone)]
struct Side {
    alpha: Vec<f64>,
    grad: Vec<f64>,
    /// `C · Σ_{u at upper bound} Q_tu`, kept for gradient reconstruction.
    gbar: Vec<f64>,
    p: Vec<f64>,
    active: Vec<usize>,
}

/// Maximal violating pair over the active set.
#[derive(Debug, Clone, Copy)]
struct Scan {
    /// `max { -s_t G_t : t ∈ I_up }` and its argmax.
    up: Option<Var>,
    gmax: f64,
    /// `max { s_t G_t : t ∈ I_low }` and its argmax.
    low: Option<Var>,
    gmax2: f64,
}

impl Scan {
    fn empty() -> Self {
        Scan {
            up: None,
            gmax: f64::NEG_INFINITY,
            low: None,
            gmax2: f64::NEG_INFINITY,
        }
    }

    #[inline]
    fn visit_a(&mut self, p: usize, alpha: f64, g: f64, c: f64) {
        if alpha < c && -g >= self.gmax {
            self.gmax = -g;
            self.up = Some(Var::A(p));
        }
        if alpha > 0.0 && g >= self.gmax2 {
            self.gmax2 = g;
            self.low = Some(Var::A(p));
        }
    }

    #[inline]
    fn visit_b(&mut self, p: usize, alpha: f64, g: f64, c: f64) {
        if alpha > 0.0 && g >= self.gmax {
            self.gmax = g;
            self.up = Some(Var::B(p));
        }
        if alpha < c && -g >= self.gmax2 {
            self.gmax2 = -g;
            self.low = Some(Var::B(p));
        }
    }

    fn gap(&self) -> f64 {
        if self.up.is_some() && self.low.is_some() {
            self.gmax + self.gmax2
        } else {
            0.0
        }
    }
}

struct Solver<'a> {
    k: &'a SymMatrix,
    l: usize,
    c: f64,
    tol: f64,
    second_order: bool,
    a: Side,
    b: Side,
    diag: Vec<f64>,
    unshrunk: bool,
}

impl Solver<'_> {
    fn alpha(&self, v: Var) -> f64 {
        match v {
            Var::A(p) => self.a.alpha[p],
            Var::B(p) => self.b.alpha[p],
        }
    }

    fn alpha_mut(&mut self, v: Var) -> &mut f64 {
        match v {
            Var::A(p) => &mut self.a.alpha[p],
            Var::B(p) => &mut self.b.alpha[p],
        }
    }

    fn grad(&self, v: Var) -> f64 {
        match v {
            Var::A(p) => self.a.grad[p],
            Var::B(p) => self.b.grad[p],
        }
    }

    fn n_active(&self) -> usize {
        self.a.active.len() + self.b.active.len()
    }

    fn scan(&self) -> Scan {
        let mut s = Scan::empty();
        for &p in &self.a.active {
            s.visit_a(p, self.a.alpha[p], self.a.grad[p], self.c);
        }
        for &p in &self.b.active {
            s.visit_b(p, self.b.alpha[p], self.b.grad[p], self.c);
        }
        s
    }

    /// Second-order partner for `i` among the active variables in `I_low`.
    fn second_order_partner(&self, i: Var, gmax: f64) -> Option<Var> {
        let ii = i.point();
        let krow = self.k.row(ii);
        let mut best = f64::INFINITY;
        let mut pick = None;
        let mut consider = |v: Var, yg: f64| {
            let diff = gmax + yg;
            if diff > 0.0 {
                let pt = v.point();
                let quad = self.diag[ii] + self.diag[pt] - 2.0 * krow[pt];
                let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                if obj <= best {
                    best = obj;
                    pick = Some(v);
                }
            }
        };
        for &p in &self.a.active {
            if self.a.alpha[p] > 0.0 {
                consider(Var::A(p), self.a.grad[p]);
            }
        }
        for &p in &self.b.active {
            if self.b.alpha[p] < self.c {
                consider(Var::B(p), -self.b.grad[p]);
            }
        }
        pick
    }

    /// Two-variable step on `(i, j)`; returns the scan of the updated state.
    fn update(&mut self, i: Var, j: Var) -> Scan {
        let c = self.c;
        let (si, sj) = (i.sign(), j.sign());
        let (ii, jj) = (i.point(), j.point());
        let qij = si * sj * self.k.get(ii, jj);
        let (old_i, old_j) = (self.alpha(i), self.alpha(j));
        let (gi, gj) = (self.grad(i), self.grad(j));
        let (mut ai, mut aj) = (old_i, old_j);
        if si != sj {
            let mut quad = self.diag[ii] + self.diag[jj] + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-gi - gj) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let mut quad = self.diag[ii] + self.diag[jj] - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (gi - gj) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        *self.alpha_mut(i) = ai;
        *self.alpha_mut(j) = aj;

        // G_t += s_t (s_i Δα_i K_i,t + s_j Δα_j K_j,t), fused with the next scan
        let ci = si * (ai - old_i);
        let cj = sj * (aj - old_j);
        let (ri, rj) = (self.k.row(ii), self.k.row(jj));
        let mut scan = Scan::empty();
        let a = &mut self.a;
        for &p in &a.active {
            let g = a.grad[p] + (ci * ri[p] + cj * rj[p]);
            a.grad[p] = g;
            scan.visit_a(p, a.alpha[p], g, c);
        }
        let b = &mut self.b;
        for &p in &b.active {
            let g = b.grad[p] - (ci * ri[p] + cj * rj[p]);
            b.grad[p] = g;
            scan.visit_b(p, b.alpha[p], g, c);
        }

        for (var, old, new) in [(i, old_i, ai), (j, old_j, aj)] {
            let (was, now) = (old >= c, new >= c);
            if was != now {
                let coef = if was { -c } else { c } * var.sign();
                let row = self.k.row(var.point());
                for ((ga, gb), &kv) in self.a.gbar.iter_mut().zip(self.b.gbar.iter_mut()).zip(row) {
                    *ga += coef * kv;
                    *gb -= coef * kv;
                }
            }
        }
        scan
    }

    fn shrink(&mut self) {
        let s = self.scan();
        let (gmax1, gmax2) = (s.gmax, s.gmax2);
        if !self.unshrunk && gmax1 + gmax2 <= self.tol * 10.0 {
            self.unshrunk = true;
            self.unshrink();
        }
        let c = self.c;
        // a variable leaves when it sits at a bound and pushes against it
        let a = &mut self.a;
        a.active.retain(|&p| {
            let (al, g) = (a.alpha[p], a.grad[p]);
            !((al >= c && -g > gmax1) || (al <= 0.0 && g > gmax2))
        });
        let b = &mut self.b;
        b.active.retain(|&p| {
            let (al, g) = (b.alpha[p], b.grad[p]);
            !((al >= c && -g > gmax2) || (al <= 0.0 && g > gmax1))
        });
    }

    /// Recomputes inactive gradients and reactivates every variable.
    fn unshrink(&mut self) {
        let l = self.l;
        if self.n_active() == 2 * l {
            return;
        }
        let inactive = |side: &Side| -> Vec<usize> {
            let mut on = vec![false; l];
            side.active.iter().for_each(|&p| on[p] = true);
            (0..l).filter(|&p| !on[p]).collect()
        };
        let (in_a, in_b) = (inactive(&self.a), inactive(&self.b));
        for &p in &in_a {
            self.a.grad[p] = self.a.gbar[p] + self.a.p[p];
        }
        for &p in &in_b {
            self.b.grad[p] = self.b.gbar[p] + self.b.p[p];
        }
        let c = self.c;
        let free: Vec<(usize, f64)> = self
            .a
            .active
            .iter()
            .map(|&p| (p, self.a.alpha[p]))
            .chain(self.b.active.iter().map(|&p| (p, -self.b.alpha[p])))
            .filter(|&(_, sa)| sa != 0.0 && sa.abs() < c)
            .collect();
        for (t, coef) in free {
            let row = self.k.row(t);
            for &p in &in_a {
                self.a.grad[p] += coef * row[p];
            }
            for &p in &in_b {
                self.b.grad[p] -= coef * row[p];
            }
        }
        self.a.active = (0..l).collect();
        self.b.active = (0..l).collect();
    }

    /// Offset from free variables, else the midpoint of the KKT bounds.
    fn rho(&self) -> f64 {
        let c = self.c;
        let mut ub = f64::INFINITY;
        let mut lb = f64::NEG_INFINITY;
        let mut n_free = 0usize;
        let mut sum_free = 0.0;
        let sides = [(&self.a, 1.0), (&self.b, -1.0)];
        for (side, st) in sides {
            for (&al, &g) in side.alpha.iter().zip(&side.grad) {
                let yg = st * g;
                let upper = al >= c;
                let lower = al <= 0.0;
                if upper || lower {
                    // y=+1 at lower or y=-1 at upper bounds rho from above
                    if (upper && st < 0.0) || (lower && st > 0.0) {
                        ub = ub.min(yg);
                    } else {
                        lb = lb.max(yg);
                    }
                } else {
                    n_free += 1;
                    sum_free += yg;
                }
            }
        }
        if n_free > 0 {
            sum_free / n_free as f64
        } else if ub.is_finite() && lb.is_finite() {
            0.5 * (ub + lb)
        } else {
            0.0
        }
    }

    fn pair(&self, scan: &Scan) -> Option<(Var, Var)> {
        let i = scan.up?;
        if scan.gap() < self.tol {
            return None;
        }
        let j = if self.second_order {
            self.second_order_partner(i, scan.gmax)?
        } else {
            scan.low?
        };
        Some((i, j))
    }
}

pub(super) fn solve(k: &SymMatrix, y: &[f64], cfg: &SvrConfig) -> SmoOutput {
    let l = y.len();
    let side = |p: Vec<f64>| Side {
        alpha: vec![0.0; l],
        grad: p.clone(),
        gbar: vec![0.0; l],
        p,
        active: (0..l).collect(),
    };
    let mut s = Solver {
        k,
        l,
        c: cfg.c,
        tol: cfg.tol,
        second_order: cfg.working_set == WorkingSet::SecondOrder,
        a: side(y.iter().map(|v| cfg.epsilon - v).collect()),
        b: side(y.iter().map(|v| cfg.epsilon + v).collect()),
        diag: k.diag(),
        unshrunk: false,
    };
    let mut iterations = 0;
    let mut converged = false;
    let period = l.clamp(1, 1000);
    let mut counter = period + 1;
    let mut scan = s.scan();
    while iterations < cfg.max_iter {
        counter -= 1;
        if counter == 0 {
            counter = period;
            if cfg.shrinking {
                s.shrink();
                scan = s.scan();
            }
        }
        let (i, j) = match s.pair(&scan) {
            Some(pair) => pair,
            None => {
                s.unshrink();
                scan = s.scan();
                match s.pair(&scan) {
                    Some(pair) => {
                        counter = 1;
                        pair
                    }
                    None => {
                        converged = true;
                        break;
                    }
                }
            }
        };
        iterations += 1;
        scan = s.update(i, j);
    }
    s.unshrink();
    let gap = s.scan().gap();
    let rho = s.rho();
    let beta =
        s.a.alpha
            .iter()
            .zip(&s.b.alpha)
            .map(|(a, b)| (a - b).clamp(-cfg.c, cfg.c))
            .collect();
    SmoOutput {
        beta,
        rho,
        converged,
        iterations,
        gap,
    }
}
