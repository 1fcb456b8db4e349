//! Per-primitive Adam with parameter-group learning rates.

use crate::backward::{GradientBundle, PrimitiveGrad};
use crate::scalar::Real;
use crate::scene::{Scene, SkewGaussian};

/// Learning rate for each parameter group.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroupRates<T> {
    pub position: T,
    pub scale: T,
    pub rot: T,
    pub opacity: T,
    pub sh_dc: T,
    pub sh_rest: T,
    pub beta: T,
    pub dir: T,
}

const FIXED: usize = 3 + 3 + 4 + 2 + 3 + 3;

pub fn param_count(sh_len: usize) -> usize {
    FIXED + 3 * sh_len
}

/// Flattened parameter order: μ, log-scale, quaternion, opacity logits, β,
/// boundary direction, then SH coefficients channel-interleaved.
pub fn flatten<T: Real>(g: &SkewGaussian<T>, out: &mut Vec<T>) {
    out.clear();
    out.extend_from_slice(&g.mu);
    out.extend_from_slice(&g.log_scale);
    out.extend_from_slice(&g.rot);
    out.extend_from_slice(&g.opacity_logits);
    out.extend_from_slice(&g.beta);
    out.extend_from_slice(&g.dir);
    for c in &g.sh {
        out.extend_from_slice(c);
    }
}

pub fn unflatten<T: Real>(v: &[T], g: &mut SkewGaussian<T>) {
    g.mu.copy_from_slice(&v[0..3]);
    g.log_scale.copy_from_slice(&v[3..6]);
    g.rot.copy_from_slice(&v[6..10]);
    g.opacity_logits.copy_from_slice(&v[10..12]);
    g.beta.copy_from_slice(&v[12..15]);
    g.dir.copy_from_slice(&v[15..18]);
    for (k, c) in g.sh.iter_mut().enumerate() {
        c.copy_from_slice(&v[FIXED + 3 * k..FIXED + 3 * k + 3]);
    }
}

pub fn flatten_grad<T: Real>(g: &PrimitiveGrad<T>, out: &mut Vec<T>) {
    out.clear();
    out.extend_from_slice(&g.d_mu);
    out.extend_from_slice(&g.d_log_scale);
    out.extend_from_slice(&g.d_rot);
    out.extend_from_slice(&g.d_opacity_logits);
    out.extend_from_slice(&g.d_beta);
    out.extend_from_slice(&g.d_dir);
    for c in &g.d_sh {
        out.extend_from_slice(c);
    }
}

impl<T: Real> GroupRates<T> {
    pub fn rates(&self, sh_len: usize) -> Vec<T> {
        let mut r = Vec::with_capacity(param_count(sh_len));
        r.extend([self.position; 3]);
        r.extend([self.scale; 3]);
        r.extend([self.rot; 4]);
        r.extend([self.opacity; 2]);
        r.extend([self.beta; 3]);
        r.extend([self.dir; 3]);
        r.extend([self.sh_dc; 3]);
        for _ in 1..sh_len {
            r.extend([self.sh_rest; 3]);
        }
        r
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Moments<T> {
    m: Vec<T>,
    v: Vec<T>,
    t: u32,
}

/// Where a primitive of the current scene came from after densification.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    Kept(usize),
    New,
}

#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    state: Vec<Moments<T>>,
    /// Primitives whose update was skipped for a non-finite gradient.
    pub skipped: usize,
}

impl<T: Real> Adam<T> {
    pub fn new(n_primitives: usize, sh_len: usize) -> Self {
        Self::with_dims(n_primitives, param_count(sh_len))
    }

    /// `slots` independent parameter vectors of length `dim`.
    pub fn with_dims(slots: usize, dim: usize) -> Self {
        let fresh = Moments { m: vec![T::zero(); dim], v: vec![T::zero(); dim], t: 0 };
        Self {
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-15),
            state: vec![fresh; slots],
            skipped: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.state.len()
    }

    pub fn is_empty(&self) -> bool {
        self.state.is_empty()
    }

    /// One bias-corrected update of a flat parameter vector in slot `slot`.
    pub fn update(&mut self, slot: usize, params: &mut [T], grads: &[T], rates: &[T]) {
        let s = &mut self.state[slot];
        s.t += 1;
        let t = s.t as i32;
        let c1 = T::one() - self.beta1.powi(t);
        let c2 = T::one() - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            s.m[i] = self.beta1 * s.m[i] + (T::one() - self.beta1) * g;
            s.v[i] = self.beta2 * s.v[i] + (T::one() - self.beta2) * g * g;
            let mh = s.m[i] / c1;
            let vh = s.v[i] / c2;
            params[i] -= rates[i] * mh / (vh.sqrt() + self.eps);
        }
    }

    /// Applies one step to every primitive. Quaternions are renormalized;
    /// primitives with a non-finite gradient are left alone.
    pub fn step(&mut self, scene: &mut Scene<T>, grads: &GradientBundle<T>, rates: &GroupRates<T>) {
        assert_eq!(self.state.len(), scene.len(), "optimizer state out of sync with scene");
        let sh_len = crate::scene::sh_coeff_count(scene.sh_degree);
        let lr = rates.rates(sh_len);
        let mut p = Vec::new();
        let mut g = Vec::new();
        for (i, prim) in scene.primitives.iter_mut().enumerate() {
            if !grads.grads[i].is_finite() {
                self.skipped += 1;
                continue;
            }
            flatten(prim, &mut p);
            flatten_grad(&grads.grads[i], &mut g);
            self.update(i, &mut p, &g, &lr);
            unflatten(&p, prim);
            prim.normalize_rotation();
        }
    }

    /// Carries moments over to a rebuilt scene. Copies of an existing
    /// primitive keep its moments; new ones start from zero.
    pub fn remap(&mut self, origins: &[Origin]) {
        let n = self.state.first().map(|s| s.m.len()).unwrap_or(0);
        let fresh = Moments { m: vec![T::zero(); n], v: vec![T::zero(); n], t: 0 };
        let old = std::mem::take(&mut self.state);
        self.state = origins
            .iter()
            .map(|o| match o {
                Origin::Kept(i) => old[*i].clone(),
                Origin::New => fresh.clone(),
            })
            .collect();
    }

    /// Moment vectors of one primitive, for diagnostics and tests.
    pub fn moments(&self, slot: usize) -> (&[T], &[T]) {
        (&self.state[slot].m, &self.state[slot].v)
    }
}
