use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;

use ndarray::{Array2, Axis};

use super::DiffError;

/// Dense row-major matrix; scalars are 1x1 and spectra are 1xN rows.
pub type Tensor = Array2<f64>;

/// Local derivative of an elementwise operand, laid out in output shape.
#[derive(Debug)]
pub(crate) enum Partial {
    One,
    NegOne,
    Scaled(Tensor),
}

#[derive(Debug)]
pub(crate) enum Op {
    Leaf,
    Unary { x: usize, d: Tensor },
    Binary { a: usize, b: usize, da: Option<Partial>, db: Option<Partial> },
    MatMul { a: usize, b: usize },
    Transpose { x: usize },
    SumAll { x: usize },
    SumRows { x: usize },
    SumCols { x: usize },
    SoftmaxRows { x: usize },
    SliceCols { x: usize, start: usize },
    ConcatCols { parts: Vec<(usize, usize)> },
}

struct Node {
    value: Rc<Tensor>,
    op: Op,
    requires_grad: bool,
}

/// First non-finite value or domain violation seen while recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Fault {
    pub op: &'static str,
    pub node: usize,
    pub domain: bool,
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.domain {
            write!(f, "{} domain (node {})", self.op, self.node)
        } else {
            write!(f, "non-finite value from {} (node {})", self.op, self.node)
        }
    }
}

/// Records a computation for one reverse sweep.
///
/// Nodes are appended in evaluation order, so the node list is already a
/// topological order; the reverse sweep walks it backwards once. Operators
/// never fail; the first fault is latched and reported by [`Tape::check`] and
/// [`Tape::backward`].
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    fault: RefCell<Option<Fault>>,
}

/// Handle to a recorded value.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    pub(crate) tape: &'t Tape,
    pub(crate) id: usize,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var#{}{:?}", self.id, self.shape())
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

    /// Differentiable input.
    pub fn var(&self, value: Tensor) -> Var<'_> {
        self.leaf(value, true, "input")
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.var(Array2::from_elem((1, 1), value))
    }

    /// Differentiable 1xN row.
    pub fn row(&self, values: &[f64]) -> Var<'_> {
        self.var(row_tensor(values))
    }

    /// Non-differentiable input; operations over constants only record values.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.leaf(value, false, "constant")
    }

    pub fn constant_scalar(&self, value: f64) -> Var<'_> {
        self.constant(Array2::from_elem((1, 1), value))
    }

    pub fn constant_row(&self, values: &[f64]) -> Var<'_> {
        self.constant(row_tensor(values))
    }

    fn leaf(&self, value: Tensor, requires_grad: bool, name: &'static str) -> Var<'_> {
        let finite = value.iter().all(|v| v.is_finite());
        let id = self.push(value, Op::Leaf, requires_grad);
        if !finite {
            self.record_fault(name, id, false);
        }
        Var { tape: self, id }
    }

    pub(crate) fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> usize {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value: Rc::new(value), op, requires_grad });
        nodes.len() - 1
    }

    pub(crate) fn value_rc(&self, id: usize) -> Rc<Tensor> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    pub(crate) fn requires_grad(&self, id: usize) -> bool {
        self.nodes.borrow()[id].requires_grad
    }

    pub(crate) fn record_fault(&self, op: &'static str, node: usize, domain: bool) {
        let mut fault = self.fault.borrow_mut();
        if fault.is_none() {
            *fault = Some(Fault { op, node, domain });
        }
    }

    pub fn fault(&self) -> Option<Fault> {
        self.fault.borrow().clone()
    }

    /// Fails with the first recorded fault, naming the producing primitive.
    pub fn check(&self) -> Result<(), DiffError> {
        match self.fault() {
            None => Ok(()),
            Some(f) if f.domain => Err(DiffError::Domain { op: f.op }),
            Some(f) => Err(DiffError::NonFinite { op: f.op }),
        }
    }

    /// Reverse sweep seeded with d(output)/d(output) = 1 for a scalar output.
    pub fn backward(&self, output: Var<'_>) -> Result<Gradients, DiffError> {
        self.backward_seeded(output, None)
    }

    /// Reverse sweep with an explicit seed tensor (defaults to ones).
    pub fn backward_seeded(
        &self,
        output: Var<'_>,
        seed: Option<Tensor>,
    ) -> Result<Gradients, DiffError> {
        self.check()?;
        let nodes = self.nodes.borrow();
        let n = output.id + 1;
        let mut grads: Vec<Option<Tensor>> = vec![None; n];
        let out_shape = nodes[output.id].value.dim();
        let seed = seed.unwrap_or_else(|| Array2::ones(out_shape));
        if seed.dim() != out_shape {
            return Err(DiffError::Shape(format!(
                "seed shape {:?} does not match output {:?}",
                seed.dim(),
                out_shape
            )));
        }
        grads[output.id] = Some(seed);

        for id in (0..n).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            match &node.op {
                Op::Leaf => {
                    grads[id] = Some(g);
                    continue;
                }
                Op::Unary { x, d } => {
                    accumulate(&mut grads, &nodes, *x, &g * d);
                }
                Op::Binary { a, b, da, db } => {
                    if let Some(p) = da {
                        let ga = apply_partial(&g, p);
                        accumulate(&mut grads, &nodes, *a, ga);
                    }
                    if let Some(p) = db {
                        let gb = apply_partial(&g, p);
                        accumulate(&mut grads, &nodes, *b, gb);
                    }
                }
                Op::MatMul { a, b } => {
                    if nodes[*a].requires_grad {
                        let ga = g.dot(&nodes[*b].value.t());
                        accumulate(&mut grads, &nodes, *a, ga);
                    }
                    if nodes[*b].requires_grad {
                        let gb = nodes[*a].value.t().dot(&g);
                        accumulate(&mut grads, &nodes, *b, gb);
                    }
                }
                Op::Transpose { x } => {
                    accumulate(&mut grads, &nodes, *x, g.t().to_owned());
                }
                Op::SumAll { x } => {
                    let shape = nodes[*x].value.dim();
                    accumulate(&mut grads, &nodes, *x, Array2::from_elem(shape, g[[0, 0]]));
                }
                Op::SumRows { x } => {
                    let shape = nodes[*x].value.dim();
                    let full = g.broadcast(shape).expect("sum-rows broadcast").to_owned();
                    accumulate(&mut grads, &nodes, *x, full);
                }
                Op::SumCols { x } => {
                    let shape = nodes[*x].value.dim();
                    let full = g.broadcast(shape).expect("sum-cols broadcast").to_owned();
                    accumulate(&mut grads, &nodes, *x, full);
                }
                Op::SoftmaxRows { x } => {
                    let y = &node.value;
                    let gy = &g * &**y;
                    let s = gy.sum_axis(Axis(1)).insert_axis(Axis(1));
                    let gx = &gy - &(&**y * &s);
                    accumulate(&mut grads, &nodes, *x, gx);
                }
                Op::SliceCols { x, start } => {
                    let (rows, cols) = nodes[*x].value.dim();
                    let mut full = Array2::zeros((rows, cols));
                    let w = g.ncols();
                    full.slice_mut(ndarray::s![.., *start..*start + w]).assign(&g);
                    accumulate(&mut grads, &nodes, *x, full);
                }
                Op::ConcatCols { parts } => {
                    let mut offset = 0;
                    for &(pid, width) in parts {
                        let piece = g.slice(ndarray::s![.., offset..offset + width]).to_owned();
                        accumulate(&mut grads, &nodes, pid, piece);
                        offset += width;
                    }
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn apply_partial(g: &Tensor, p: &Partial) -> Tensor {
    match p {
        Partial::One => g.clone(),
        Partial::NegOne => -g,
        Partial::Scaled(d) => g * d,
    }
}

/// Adds `g` (output-shaped) into the gradient slot of `target`, summing over
/// broadcast axes.
fn accumulate(grads: &mut [Option<Tensor>], nodes: &[Node], target: usize, g: Tensor) {
    if !nodes[target].requires_grad {
        return;
    }
    let shape = nodes[target].value.dim();
    let g = reduce_to(g, shape);
    match &mut grads[target] {
        Some(acc) => *acc += &g,
        slot @ None => *slot = Some(g),
    }
}

pub(crate) fn reduce_to(mut g: Tensor, shape: (usize, usize)) -> Tensor {
    if g.dim() == shape {
        return g;
    }
    if shape.0 == 1 && g.nrows() != 1 {
        g = g.sum_axis(Axis(0)).insert_axis(Axis(0));
    }
    if shape.1 == 1 && g.ncols() != 1 {
        g = g.sum_axis(Axis(1)).insert_axis(Axis(1));
    }
    g
}

pub(crate) fn row_tensor(values: &[f64]) -> Tensor {
    Array2::from_shape_vec((1, values.len()), values.to_vec()).expect("row shape")
}

/// Result of a reverse sweep: one gradient per node reachable from the output.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient with respect to `v`, `None` when `v` does not influence the
    /// output or is a constant.
    pub fn get(&self, v: Var<'_>) -> Option<&Tensor> {
        self.grads.get(v.id).and_then(|g| g.as_ref())
    }

    /// Gradient with respect to `v`, zeros when unreachable.
    pub fn wrt(&self, v: Var<'_>) -> Tensor {
        self.get(v).cloned().unwrap_or_else(|| Array2::zeros(v.shape()))
    }

    pub fn scalar(&self, v: Var<'_>) -> f64 {
        self.get(v).map(|g| g[[0, 0]]).unwrap_or(0.0)
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
        self.tape.value_rc(self.id)
    }

    /// First element; the value of a scalar.
    pub fn item(&self) -> f64 {
        self.tape.nodes.borrow()[self.id].value[[0, 0]]
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.tape.nodes.borrow()[self.id].value.iter().copied().collect()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.tape.nodes.borrow()[self.id].value.dim()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.requires_grad(self.id)
    }
}
