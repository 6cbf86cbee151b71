use std::collections::BTreeMap;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::networks::ParamStore;

/// Adam with bias correction.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Number of steps taken, skipped ones included.
    pub t: u64,
    pub m: ParamStore,
    pub v: ParamStore,
}

impl Adam {
    pub fn new(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            eps,
            t: 0,
            m: ParamStore::new(),
            v: ParamStore::new(),
        }
    }

    /// Applies one update to the params named in `grads`.
    ///
    /// Returns `Ok(false)` without touching params or moments when any
    /// gradient is not finite.
    pub fn step(&mut self, params: &mut ParamStore, grads: &BTreeMap<String, Tensor>) -> Result<bool> {
        for (name, g) in grads {
            let p = params
                .get(name)
                .ok_or_else(|| Error::contract(format!("gradient for unknown parameter {name}")))?;
            if p.shape() != g.shape() {
                return Err(Error::contract(format!("{name}: gradient {:?} vs param {:?}", g.shape(), p.shape())));
            }
        }
        self.t += 1;
        if let Some((name, _)) = grads.iter().find(|(_, g)| !g.all_finite()) {
            log::warn!("skipping step {}: non-finite gradient for {name}", self.t);
            return Ok(false);
        }
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        for (name, g) in grads {
            let shape = g.shape();
            if !self.m.contains(name) {
                self.m.insert(name.clone(), Tensor::zeros(shape));
                self.v.insert(name.clone(), Tensor::zeros(shape));
            }
            let m = self.m.get_mut(name).expect("inserted").data_mut();
            for (mi, gi) in m.iter_mut().zip(g.data()) {
                *mi = b1 * *mi + (1.0 - b1) * gi;
            }
            let v = self.v.get_mut(name).expect("inserted").data_mut();
            for (vi, gi) in v.iter_mut().zip(g.data()) {
                *vi = b2 * *vi + (1.0 - b2) * gi * gi;
            }
            let (m, v) = (self.m.get(name).expect("m"), self.v.get(name).expect("v"));
            let p = params.get_mut(name).expect("checked").data_mut();
            for ((pi, mi), vi) in p.iter_mut().zip(m.data()).zip(v.data()) {
                let mhat = mi / c1;
                let vhat = vi / c2;
                *pi -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(true)
    }
}
