//! Independent oracles for the acceptance suite. Nothing here shares code
//! with the implementation paths it checks: the reward oracle recomputes
//! every term from scratch in f64, and the gradcheck oracle evaluates an
//! f64 forward pass with central differences.

use singrasp_core::env::{Action, RewardConfig};
use singrasp_core::math::Vec3;
use singrasp_core::nn::{orthogonal, ParamStore, Tape, Tensor};
use singrasp_core::physics::{fk_hand, PhysicsConfig, WorldState};
use singrasp_core::rng;

pub struct RewardOracleInputs<'a> {
    pub world: &'a WorldState,
    pub action: &'a Action,
    pub goal: Vec3,
    pub points: &'a [Vec3],
    pub cfg: &'a RewardConfig,
    pub phys: &'a PhysicsConfig,
}

pub struct RewardOracleOutput {
    pub palm: f64,
    pub joint: f64,
    pub fingertip: f64,
    pub lift: f64,
    pub goal: f64,
    pub singulation: f64,
    pub bonus: f64,
    pub d_palm: f64,
    pub d_link: f64,
    pub total: f64,
    /// Sum of term magnitudes, for a cancellation-aware total tolerance.
    pub abs_term_sum: f64,
}

fn dist3(a: (f64, f64, f64), b: (f64, f64, f64)) -> f64 {
    let (dx, dy, dz) = (a.0 - b.0, a.1 - b.1, a.2 - b.2);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Straight-from-the-table recomputation of every reward term in f64.
pub fn reward_oracle(inp: &RewardOracleInputs<'_>) -> RewardOracleOutput {
    let geom = inp.phys.hand_geometry();
    let pts = fk_hand(&inp.world.hand, &geom);
    let p64 = |v: Vec3| (v.x as f64, v.y as f64, v.z as f64);
    let samples: Vec<(f64, f64, f64)> = inp.points.iter().map(|p| p64(*p)).collect();

    let min_dist_to_samples = |p: (f64, f64, f64)| -> f64 {
        let mut best = f64::INFINITY;
        for s in &samples {
            let d = dist3(p, *s);
            if d < best {
                best = d;
            }
        }
        best
    };

    let link_mins: Vec<f64> = pts.links.iter().map(|l| min_dist_to_samples(p64(*l))).collect();
    let d_palm = link_mins[0];
    let joint_sum: f64 = link_mins.iter().sum();
    let d_link = link_mins.iter().cloned().fold(f64::INFINITY, f64::min);
    let fingertip_sum: f64 = pts
        .fingertips
        .iter()
        .map(|t| min_dist_to_samples(p64(*t)))
        .sum();

    let target = inp.world.target();
    let tpos = (target.x as f64, target.y as f64, target.z as f64);
    let goal_dist = dist3(tpos, (inp.goal.x as f64, inp.goal.y as f64, inp.goal.z as f64));

    let mut min_obstacle = f64::INFINITY;
    for o in inp.world.obstacles() {
        let d = dist3(tpos, (o.x as f64, o.y as f64, o.z as f64));
        if d < min_obstacle {
            min_obstacle = d;
        }
    }

    let palm = -(inp.cfg.palm_coef as f64) * d_palm;
    let joint = -joint_sum;
    let fingertip = -fingertip_sum;
    let lift = inp.cfg.lift_base as f64 + inp.cfg.lift_coef as f64 * inp.action.0[2] as f64;
    let goal_r = inp.cfg.goal_base as f64 - inp.cfg.goal_coef as f64 * goal_dist;
    let singulation = if min_obstacle.is_finite() {
        inp.cfg.singulation_coef as f64 * min_obstacle.min(inp.cfg.singulation_dist_cap as f64)
    } else {
        0.0
    };
    let bonus = 1.0 / (1.0 + inp.cfg.bonus_coef as f64 * goal_dist);

    let approach = d_palm >= inp.cfg.branch_palm_dist as f64 || d_link >= inp.cfg.branch_link_dist as f64;
    let total = if approach {
        palm + joint + singulation
    } else {
        palm + joint + fingertip + lift + goal_r + singulation + bonus
    };
    let abs_term_sum = palm.abs()
        + joint.abs()
        + fingertip.abs()
        + lift.abs()
        + goal_r.abs()
        + singulation.abs()
        + bonus.abs();

    RewardOracleOutput {
        palm,
        joint,
        fingertip,
        lift,
        goal: goal_r,
        singulation,
        bonus,
        d_palm,
        d_link,
        total,
        abs_term_sum,
    }
}

/// f64 snapshot of one dense stack for the finite-difference oracle.
struct ActorF64 {
    w0: Vec<f64>,
    b0: Vec<f64>,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
    din: usize,
    dh: usize,
    dout: usize,
}

fn elu64(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp() - 1.0
    }
}

impl ActorF64 {
    fn layer0(&self, obs: &[f64], batch: usize) -> Vec<f64> {
        let mut h = vec![0.0; batch * self.dh];
        for r in 0..batch {
            for j in 0..self.dh {
                let mut z = self.b0[j];
                for i in 0..self.din {
                    z += obs[r * self.din + i] * self.w0[i * self.dh + j];
                }
                h[r * self.dh + j] = elu64(z);
            }
        }
        h
    }

    fn layer1(&self, h0: &[f64], batch: usize) -> Vec<f64> {
        let mut h = vec![0.0; batch * self.dh];
        for r in 0..batch {
            for j in 0..self.dh {
                let mut z = self.b1[j];
                for i in 0..self.dh {
                    z += h0[r * self.dh + i] * self.w1[i * self.dh + j];
                }
                h[r * self.dh + j] = elu64(z);
            }
        }
        h
    }

    fn loss_from_h1(&self, h1: &[f64], target: &[f64], batch: usize) -> f64 {
        let mut acc = 0.0;
        for r in 0..batch {
            for j in 0..self.dout {
                let mut z = self.b2[j];
                for i in 0..self.dh {
                    z += h1[r * self.dh + i] * self.w2[i * self.dout + j];
                }
                let d = z - target[r * self.dout + j];
                acc += d * d;
            }
        }
        acc / (batch * self.dout) as f64
    }
}

/// Gradient check of the taped backward on an [din -> 256 -> 256 -> dout]
/// stack against central finite differences of an independent f64 forward.
/// Activations unaffected by a perturbation are cached, so the full sweep
/// over every parameter stays fast. Returns the max relative error.
pub fn fd_gradcheck_actor(din: usize, dout: usize, batch: usize, seed: u64) -> f64 {
    use rayon::prelude::*;
    let dh = 256usize;
    let mut s = rng::stream(seed, rng::Purpose::Init, 0, 0);
    let mut store = ParamStore::new();
    let w0 = store.add("w0", Tensor::from_vec(&[din, dh], orthogonal(din, dh, 1.0, &mut s)));
    let b0 = store.add("b0", Tensor::from_vec(&[1, dh], vec![0.01; dh]));
    let w1 = store.add("w1", Tensor::from_vec(&[dh, dh], orthogonal(dh, dh, 1.0, &mut s)));
    let b1 = store.add("b1", Tensor::from_vec(&[1, dh], vec![-0.01; dh]));
    let w2 = store.add("w2", Tensor::from_vec(&[dh, dout], orthogonal(dh, dout, 0.01, &mut s)));
    let b2 = store.add("b2", Tensor::from_vec(&[1, dout], vec![0.0; dout]));

    let obs: Vec<f32> = (0..batch * din)
        .map(|_| rng::uniform(&mut s, -1.0, 1.0))
        .collect();
    let target: Vec<f32> = (0..batch * dout)
        .map(|_| rng::uniform(&mut s, -0.5, 0.5))
        .collect();

    // Analytic gradients through the tape.
    store.zero_grads();
    {
        let mut tape = Tape::new();
        let x = tape.input(batch, din, obs.clone());
        let h0 = tape.linear(&store, x, w0, b0);
        let a0 = tape.elu(h0);
        let h1 = tape.linear(&store, a0, w1, b1);
        let a1 = tape.elu(h1);
        let y = tape.linear(&store, a1, w2, b2);
        let t = tape.input(batch, dout, target.clone());
        let d = tape.sub(y, t);
        let sq = tape.mul(d, d);
        let loss = tape.mean(sq);
        tape.backward(loss, &mut store);
    }

    let f64v = |id: usize| -> Vec<f64> {
        store.get(id).data.iter().map(|&v| v as f64).collect()
    };
    let base = ActorF64 {
        w0: f64v(w0),
        b0: f64v(b0),
        w1: f64v(w1),
        b1: f64v(b1),
        w2: f64v(w2),
        b2: f64v(b2),
        din,
        dh,
        dout,
    };
    let obs64: Vec<f64> = obs.iter().map(|&v| v as f64).collect();
    let target64: Vec<f64> = target.iter().map(|&v| v as f64).collect();
    let h0_cache = base.layer0(&obs64, batch);
    let h1_cache = base.layer1(&h0_cache, batch);

    let h = 1e-3f64;
    let rel = |analytic: f64, numeric: f64| -> f64 {
        (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
    };

    // Layer 2 parameters: only the head recomputes.
    let sweep_l2 = |vals: &Vec<f64>, grads: &[f32], is_weight: bool| -> f64 {
        (0..vals.len())
            .into_par_iter()
            .map(|i| {
                let mut m = ActorF64 {
                    w0: Vec::new(),
                    b0: Vec::new(),
                    w1: Vec::new(),
                    b1: Vec::new(),
                    w2: base.w2.clone(),
                    b2: base.b2.clone(),
                    din,
                    dh,
                    dout,
                };
                let slot = if is_weight { &mut m.w2 } else { &mut m.b2 };
                let orig = slot[i];
                slot[i] = orig + h;
                let lp = m.loss_from_h1(&h1_cache, &target64, batch);
                let slot = if is_weight { &mut m.w2 } else { &mut m.b2 };
                slot[i] = orig - h;
                let lm = m.loss_from_h1(&h1_cache, &target64, batch);
                rel(grads[i] as f64, (lp - lm) / (2.0 * h))
            })
            .reduce(|| 0.0, f64::max)
    };
    let g = |id: usize| store.get(id).grad.as_ref().unwrap().clone();
    let mut worst = sweep_l2(&base.w2, &g(w2), true);
    worst = worst.max(sweep_l2(&base.b2, &g(b2), false));

    // Layer 1 parameters: recompute from the cached first activation.
    let sweep_l1 = |is_weight: bool, grads: &[f32]| -> f64 {
        let vals = if is_weight { &base.w1 } else { &base.b1 };
        (0..vals.len())
            .into_par_iter()
            .map(|i| {
                let mut m = ActorF64 {
                    w0: Vec::new(),
                    b0: Vec::new(),
                    w1: base.w1.clone(),
                    b1: base.b1.clone(),
                    w2: base.w2.clone(),
                    b2: base.b2.clone(),
                    din,
                    dh,
                    dout,
                };
                let slot = if is_weight { &mut m.w1 } else { &mut m.b1 };
                let orig = slot[i];
                slot[i] = orig + h;
                let lp = m.loss_from_h1(&m.layer1(&h0_cache, batch), &target64, batch);
                let slot = if is_weight { &mut m.w1 } else { &mut m.b1 };
                slot[i] = orig - h;
                let lm = m.loss_from_h1(&m.layer1(&h0_cache, batch), &target64, batch);
                rel(grads[i] as f64, (lp - lm) / (2.0 * h))
            })
            .reduce(|| 0.0, f64::max)
    };
    worst = worst.max(sweep_l1(true, &g(w1)));
    worst = worst.max(sweep_l1(false, &g(b1)));

    // Layer 0 parameters: full recompute.
    let sweep_l0 = |is_weight: bool, grads: &[f32]| -> f64 {
        let vals = if is_weight { &base.w0 } else { &base.b0 };
        (0..vals.len())
            .into_par_iter()
            .map(|i| {
                let mut m = ActorF64 {
                    w0: base.w0.clone(),
                    b0: base.b0.clone(),
                    w1: base.w1.clone(),
                    b1: base.b1.clone(),
                    w2: base.w2.clone(),
                    b2: base.b2.clone(),
                    din,
                    dh,
                    dout,
                };
                let slot = if is_weight { &mut m.w0 } else { &mut m.b0 };
                let orig = slot[i];
                slot[i] = orig + h;
                let lp = m.loss_from_h1(&m.layer1(&m.layer0(&obs64, batch), batch), &target64, batch);
                let slot = if is_weight { &mut m.w0 } else { &mut m.b0 };
                slot[i] = orig - h;
                let lm = m.loss_from_h1(&m.layer1(&m.layer0(&obs64, batch), batch), &target64, batch);
                rel(grads[i] as f64, (lp - lm) / (2.0 * h))
            })
            .reduce(|| 0.0, f64::max)
    };
    worst = worst.max(sweep_l0(true, &g(w0)));
    worst = worst.max(sweep_l0(false, &g(b0)));
    worst
}
