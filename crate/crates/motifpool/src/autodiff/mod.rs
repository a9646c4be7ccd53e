//! Minimal reverse-mode automatic differentiation over dense f64 matrices.
//!
//! A `Value` wraps one matrix in a shared computation-graph node holding
//! its data, a gradient accumulator, and backward provenance. Graphs are
//! acyclic; `backward` walks the graph once in reverse topological order
//! and adds this pass's adjoints into each node's gradient accumulator,
//! so two backward calls without a grad reset double the gradients.
//!
//! Shape errors are programming errors and panic with both shapes.

mod adam;
mod ops;

pub use adam::{zero_grad, Adam, AdamConfig};

use ndarray::Array2;
use std::cell::{Ref, RefCell};
use std::collections::{HashMap, HashSet};
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

pub type Matrix = Array2<f64>;

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

/// Context handed to a backward rule: the node's forward output, the
/// adjoint arriving from downstream, and the parent values.
pub(crate) struct BackCtx<'a> {
    pub out: &'a Matrix,
    pub adj: &'a Matrix,
    pub parents: &'a [Value],
}

/// Returns one gradient contribution per parent, `None` for parents that
/// do not need gradients.
pub(crate) type BackFn = Box<dyn Fn(&BackCtx) -> Vec<Option<Matrix>>>;

pub(crate) struct Node {
    id: u64,
    data: RefCell<Matrix>,
    grad: RefCell<Matrix>,
    parents: Vec<Value>,
    backward: Option<BackFn>,
    needs_grad: bool,
    op: &'static str,
}

/// A node in the differentiation graph. Cloning shares the node.
#[derive(Clone)]
pub struct Value {
    node: Rc<Node>,
}

impl Value {
    fn leaf(data: Matrix, needs_grad: bool, op: &'static str) -> Value {
        let shape = (data.nrows(), data.ncols());
        Value {
            node: Rc::new(Node {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                data: RefCell::new(data),
                grad: RefCell::new(Matrix::zeros(shape)),
                parents: Vec::new(),
                backward: None,
                needs_grad,
                op,
            }),
        }
    }

    /// Non-differentiable leaf, e.g. an adjacency matrix.
    pub fn constant(data: Matrix) -> Value {
        Value::leaf(data, false, "const")
    }

    /// 1x1 constant.
    pub fn scalar(v: f64) -> Value {
        Value::constant(Matrix::from_elem((1, 1), v))
    }

    /// Differentiable leaf; used by `Parameter`.
    pub fn variable(data: Matrix) -> Value {
        Value::leaf(data, true, "leaf")
    }

    pub(crate) fn from_op(
        data: Matrix,
        parents: Vec<Value>,
        op: &'static str,
        backward: BackFn,
    ) -> Value {
        let needs_grad = parents.iter().any(|p| p.node.needs_grad);
        let shape = (data.nrows(), data.ncols());
        Value {
            node: Rc::new(Node {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                data: RefCell::new(data),
                grad: RefCell::new(Matrix::zeros(shape)),
                parents,
                backward: Some(backward),
                needs_grad,
                op,
            }),
        }
    }

    pub fn data(&self) -> Ref<'_, Matrix> {
        self.node.data.borrow()
    }

    pub fn grad(&self) -> Ref<'_, Matrix> {
        self.node.grad.borrow()
    }

    pub fn shape(&self) -> (usize, usize) {
        let d = self.node.data.borrow();
        (d.nrows(), d.ncols())
    }

    pub fn rows(&self) -> usize {
        self.shape().0
    }

    pub fn cols(&self) -> usize {
        self.shape().1
    }

    /// The single entry of a 1x1 value.
    pub fn item(&self) -> f64 {
        let d = self.node.data.borrow();
        assert!(
            d.nrows() == 1 && d.ncols() == 1,
            "item() requires a 1x1 value, got {}x{}",
            d.nrows(),
            d.ncols()
        );
        d[[0, 0]]
    }

    pub fn needs_grad(&self) -> bool {
        self.node.needs_grad
    }

    pub fn op(&self) -> &'static str {
        self.node.op
    }

    pub fn zero_grad(&self) {
        self.node.grad.borrow_mut().fill(0.0);
    }

    pub(crate) fn set_data(&self, data: Matrix) {
        let cur = self.shape();
        assert_eq!(
            cur,
            (data.nrows(), data.ncols()),
            "set_data must preserve the shape"
        );
        *self.node.data.borrow_mut() = data;
    }

    /// Reverse pass from a scalar loss. Populates the gradient
    /// accumulators of every reachable value that needs gradients.
    pub fn backward(&self) {
        let (r, c) = self.shape();
        assert!(r == 1 && c == 1, "backward requires a 1x1 loss, got {r}x{c}");
        if !self.node.needs_grad {
            return;
        }

        // Post-order DFS restricted to the needs_grad subgraph.
        enum Frame {
            Enter(Value),
            Exit(Value),
        }
        let mut topo: Vec<Value> = Vec::new();
        let mut visited: HashSet<u64> = HashSet::new();
        let mut stack = vec![Frame::Enter(self.clone())];
        while let Some(frame) = stack.pop() {
            match frame {
                Frame::Enter(v) => {
                    if !v.node.needs_grad || !visited.insert(v.node.id) {
                        continue;
                    }
                    stack.push(Frame::Exit(v.clone()));
                    for p in &v.node.parents {
                        stack.push(Frame::Enter(p.clone()));
                    }
                }
                Frame::Exit(v) => topo.push(v),
            }
        }

        // Fresh adjoints per pass, folded into the accumulators at the end,
        // which keeps repeated backward calls additive.
        let mut adjoint: HashMap<u64, Matrix> = HashMap::new();
        adjoint.insert(self.node.id, Matrix::ones((1, 1)));
        for v in topo.iter().rev() {
            let Some(adj) = adjoint.remove(&v.node.id) else {
                continue;
            };
            if let Some(back) = &v.node.backward {
                let out = v.node.data.borrow();
                let ctx = BackCtx {
                    out: &out,
                    adj: &adj,
                    parents: &v.node.parents,
                };
                let contribs = back(&ctx);
                debug_assert_eq!(contribs.len(), v.node.parents.len());
                for (p, contrib) in v.node.parents.iter().zip(contribs) {
                    let Some(cm) = contrib else { continue };
                    if !p.node.needs_grad {
                        continue;
                    }
                    match adjoint.get_mut(&p.node.id) {
                        Some(acc) => *acc += &cm,
                        None => {
                            adjoint.insert(p.node.id, cm);
                        }
                    }
                }
            }
            *v.node.grad.borrow_mut() += &adj;
        }
    }
}

/// A named trainable tensor: a differentiable leaf plus an identifier
/// used for checkpointing and optimizer bookkeeping.
#[derive(Clone)]
pub struct Parameter {
    name: String,
    value: Value,
}

impl Parameter {
    pub fn new(name: impl Into<String>, data: Matrix) -> Parameter {
        Parameter {
            name: name.into(),
            value: Value::variable(data),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self) -> &Value {
        &self.value
    }

    pub fn data(&self) -> Ref<'_, Matrix> {
        self.value.data()
    }

    pub fn grad(&self) -> Ref<'_, Matrix> {
        self.value.grad()
    }

    pub fn set_data(&self, data: Matrix) {
        self.value.set_data(data);
    }

    pub fn zero_grad(&self) {
        self.value.zero_grad();
    }
}
