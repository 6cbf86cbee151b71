use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;

use super::Tensor;
use crate::error::{Error, Result};

/// Reverse-mode rule of a recorded operation.
///
/// Given the input values, the output value and the gradient of the loss
/// with respect to the output, returns one gradient per input. Entries for
/// inputs whose `needs_grad` flag is false may be `None`.
pub trait Backward {
    fn backward(
        &self,
        inputs: &[&Tensor],
        output: &Tensor,
        grad: &Tensor,
        needs_grad: &[bool],
    ) -> Vec<Option<Tensor>>;
}

struct Node {
    value: Rc<Tensor>,
    inputs: Vec<usize>,
    rule: Option<Box<dyn Backward>>,
    requires_grad: bool,
}

/// Explicit record of one forward pass.
///
/// Nodes are appended in execution order, so the node list is always a
/// topological order. A tape belongs to a single thread; build a fresh one
/// per training iteration.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    grads: RefCell<Option<Vec<Option<Tensor>>>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Trainable input: gradients accumulate here on `backward`.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push_node(Rc::new(value), Vec::new(), None, true)
    }

    /// Input that never receives gradients.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push_node(Rc::new(value), Vec::new(), None, false)
    }

    pub(crate) fn constant_rc(&self, value: Rc<Tensor>) -> Var<'_> {
        self.push_node(value, Vec::new(), None, false)
    }

    /// Records `output = op(inputs)` with the given backward rule.
    ///
    /// This is the extension point for operations defined outside this
    /// module (warping, projection, pose algebra).
    pub fn record<'t>(
        &'t self,
        inputs: &[Var<'t>],
        output: Tensor,
        rule: Box<dyn Backward>,
    ) -> Var<'t> {
        let ids: Vec<usize> = inputs
            .iter()
            .map(|v| {
                debug_assert!(std::ptr::eq(v.tape, self), "var from another tape");
                v.id
            })
            .collect();
        let requires_grad = {
            let nodes = self.nodes.borrow();
            ids.iter().any(|&i| nodes[i].requires_grad)
        };
        let rule = if requires_grad { Some(rule) } else { None };
        self.push_node(Rc::new(output), ids, rule, requires_grad)
    }

    fn push_node(
        &self,
        value: Rc<Tensor>,
        inputs: Vec<usize>,
        rule: Option<Box<dyn Backward>>,
        requires_grad: bool,
    ) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            inputs,
            rule,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    /// Propagates gradients from a scalar `loss` to every leaf.
    ///
    /// Calling this twice without [`Tape::zero_grad`] is an error: the
    /// second call would silently double-count.
    pub fn backward(&self, loss: Var<'_>) -> Result<()> {
        if !std::ptr::eq(loss.tape, self) {
            return Err(Error::contract("loss was recorded on a different tape"));
        }
        if self.grads.borrow().is_some() {
            return Err(Error::contract(
                "backward called twice on the same tape without zero_grad",
            ));
        }
        let nodes = self.nodes.borrow();
        let loss_node = &nodes[loss.id];
        if loss_node.value.numel() != 1 {
            return Err(Error::contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                loss_node.value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..nodes.len()).map(|_| None).collect();
        if loss_node.requires_grad {
            grads[loss.id] = Some(Tensor::full(loss_node.value.shape(), 1.0));
        }
        for id in (0..=loss.id).rev() {
            let node = &nodes[id];
            let Some(rule) = &node.rule else { continue };
            let Some(grad) = grads[id].take() else { continue };
            let inputs: Vec<&Tensor> = node.inputs.iter().map(|&i| &*nodes[i].value).collect();
            let needs: Vec<bool> = node
                .inputs
                .iter()
                .map(|&i| nodes[i].requires_grad)
                .collect();
            let input_grads = rule.backward(&inputs, &node.value, &grad, &needs);
            debug_assert_eq!(input_grads.len(), node.inputs.len());
            for ((&input, g), need) in node.inputs.iter().zip(input_grads).zip(needs) {
                let (Some(g), true) = (g, need) else { continue };
                debug_assert_eq!(g.numel(), nodes[input].value.numel());
                match &mut grads[input] {
                    Some(acc) => acc.add_assign(&g),
                    slot @ None => *slot = Some(g),
                }
            }
        }
        *self.grads.borrow_mut() = Some(grads);
        Ok(())
    }

    /// Clears gradients so `backward` may be called again.
    pub fn zero_grad(&self) {
        *self.grads.borrow_mut() = None;
    }

    fn value_of(&self, id: usize) -> Rc<Tensor> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    fn grad_of(&self, id: usize) -> Option<Tensor> {
        let grads = self.grads.borrow();
        let grads = grads.as_ref()?;
        let nodes = self.nodes.borrow();
        if !nodes[id].inputs.is_empty() {
            return None;
        }
        match &grads[id] {
            Some(g) => Some(g.clone()),
            None if nodes[id].requires_grad => Some(Tensor::zeros(nodes[id].value.shape())),
            None => None,
        }
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn value(&self) -> Rc<Tensor> {
        self.tape.value_of(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.id].value.shape().to_vec()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes.borrow()[self.id].requires_grad
    }

    /// Value of a one-element var.
    pub fn item(&self) -> Result<f64> {
        self.value().item()
    }

    /// Gradient of a leaf after `backward`; `None` before it, for constants
    /// and for intermediate values (their gradients are freed during the
    /// sweep). Leaves the loss does not depend on report all zeros.
    pub fn grad(&self) -> Option<Tensor> {
        self.tape.grad_of(self.id)
    }

    /// Same value, cut from the graph.
    pub fn detach(&self) -> Var<'t> {
        self.tape.constant_rc(self.value())
    }
}
