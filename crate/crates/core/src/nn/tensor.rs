use std::cell::{Ref, RefCell, RefMut};
use std::collections::HashSet;
use std::fmt;
use std::rc::Rc;

use crate::error::{Error, Result};

/// Backward rule of the operation that produced a tensor.
pub(crate) trait GradFn {
    fn inputs(&self) -> Vec<&Tensor>;

    /// Adds this node's contribution to the gradients of its inputs.
    fn backward(&self, output: &Tensor, grad: &[f64]);
}

struct Inner {
    shape: Vec<usize>,
    value: RefCell<Vec<f64>>,
    grad: RefCell<Option<Vec<f64>>>,
    requires_grad: bool,
    grad_fn: Option<Box<dyn GradFn>>,
}

/// An n-dimensional `f64` array that records the operations applied to it so
/// gradients can be propagated back with [`Tensor::backward`].
///
/// Cloning is cheap and shares storage.
#[derive(Clone)]
pub struct Tensor(Rc<Inner>);

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.0.shape)
            .field("requires_grad", &self.0.requires_grad)
            .finish_non_exhaustive()
    }
}

fn check_len(shape: &[usize], len: usize) -> Result<()> {
    let expected: usize = shape.iter().product();
    if expected != len {
        return Err(Error::ShapeMismatch(format!(
            "shape {shape:?} needs {expected} values, got {len}"
        )));
    }
    Ok(())
}

impl Tensor {
    fn build(shape: Vec<usize>, values: Vec<f64>, requires_grad: bool, grad_fn: Option<Box<dyn GradFn>>) -> Self {
        Self(Rc::new(Inner {
            shape,
            value: RefCell::new(values),
            grad: RefCell::new(None),
            requires_grad,
            grad_fn,
        }))
    }

    /// A constant (no gradient is tracked).
    pub fn new(shape: &[usize], values: Vec<f64>) -> Result<Self> {
        check_len(shape, values.len())?;
        Ok(Self::build(shape.to_vec(), values, false, None))
    }

    /// A trainable leaf.
    pub fn parameter(shape: &[usize], values: Vec<f64>) -> Result<Self> {
        check_len(shape, values.len())?;
        Ok(Self::build(shape.to_vec(), values, true, None))
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self::build(shape.to_vec(), vec![0.0; n], false, None)
    }

    pub fn scalar(value: f64) -> Self {
        Self::build(Vec::new(), vec![value], false, None)
    }

    /// Result of an operation. Gradient tracking is kept only if some input
    /// requires it.
    pub(crate) fn from_op(shape: Vec<usize>, values: Vec<f64>, grad_fn: impl GradFn + 'static) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        let requires_grad = grad_fn.inputs().iter().any(|t| t.requires_grad());
        if requires_grad {
            Self::build(shape, values, true, Some(Box::new(grad_fn)))
        } else {
            Self::build(shape, values, false, None)
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn numel(&self) -> usize {
        self.0.shape.iter().product()
    }

    /// Shape as `[n, c, h, w]`; fails for other ranks.
    pub fn dims4(&self) -> Result<[usize; 4]> {
        match self.0.shape.as_slice() {
            &[n, c, h, w] => Ok([n, c, h, w]),
            other => Err(Error::ShapeMismatch(format!("expected a rank-4 tensor, got {other:?}"))),
        }
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn values(&self) -> Ref<'_, Vec<f64>> {
        self.0.value.borrow()
    }

    pub(crate) fn values_mut(&self) -> RefMut<'_, Vec<f64>> {
        self.0.value.borrow_mut()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.value.borrow().clone()
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> f64 {
        let v = self.0.value.borrow();
        assert_eq!(v.len(), 1, "item() on a tensor with {} elements", v.len());
        v[0]
    }

    /// Overwrites the stored values in place (same length required).
    pub fn set_values(&self, values: &[f64]) -> Result<()> {
        let mut v = self.0.value.borrow_mut();
        if v.len() != values.len() {
            return Err(Error::ShapeMismatch(format!(
                "cannot assign {} values to a tensor of {}",
                values.len(),
                v.len()
            )));
        }
        v.copy_from_slice(values);
        Ok(())
    }

    pub fn grad(&self) -> Option<Vec<f64>> {
        self.0.grad.borrow().clone()
    }

    pub(crate) fn grad_ref(&self) -> Ref<'_, Option<Vec<f64>>> {
        self.0.grad.borrow()
    }

    pub fn zero_grad(&self) {
        *self.0.grad.borrow_mut() = None;
    }

    /// A constant copy cut from the graph.
    pub fn detach(&self) -> Tensor {
        Self::build(self.0.shape.clone(), self.to_vec(), false, None)
    }

    pub(crate) fn accumulate_grad(&self, g: &[f64]) {
        if !self.0.requires_grad {
            return;
        }
        let mut slot = self.0.grad.borrow_mut();
        match slot.as_mut() {
            Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
            None => *slot = Some(g.to_vec()),
        }
    }

    /// Lets `f` add into the gradient buffer, allocating it as zeros if needed.
    pub(crate) fn with_grad_mut(&self, f: impl FnOnce(&mut [f64])) {
        if !self.0.requires_grad {
            return;
        }
        let mut slot = self.0.grad.borrow_mut();
        let acc = slot.get_or_insert_with(|| vec![0.0; self.numel()]);
        f(acc);
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.0.value.borrow().iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }

    fn id(&self) -> *const Inner {
        Rc::as_ptr(&self.0)
    }

    /// Back-propagates from this tensor, seeding its gradient with ones.
    /// Gradients accumulate into every tensor that requires them.
    pub fn backward(&self) {
        if !self.requires_grad() {
            return;
        }
        let order = self.topological_order();
        self.accumulate_grad(&vec![1.0; self.numel()]);
        for node in order.iter().rev() {
            let Some(grad_fn) = node.0.grad_fn.as_ref() else {
                continue;
            };
            let grad = node.0.grad.borrow();
            if let Some(g) = grad.as_ref() {
                grad_fn.backward(node, g);
            }
        }
    }

    /// Post-order over the nodes reachable through tracked inputs.
    fn topological_order(&self) -> Vec<Tensor> {
        let mut visited: HashSet<*const Inner> = HashSet::new();
        let mut order = Vec::new();
        let mut stack: Vec<(Tensor, bool)> = vec![(self.clone(), false)];
        while let Some((node, expanded)) = stack.pop() {
            if expanded {
                order.push(node);
                continue;
            }
            if !visited.insert(node.id()) {
                continue;
            }
            stack.push((node.clone(), true));
            if let Some(f) = node.0.grad_fn.as_ref() {
                for input in f.inputs() {
                    if input.requires_grad() && !visited.contains(&input.id()) {
                        stack.push((input.clone(), false));
                    }
                }
            }
        }
        order
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_checks() {
        assert!(Tensor::new(&[2, 3], vec![0.0; 5]).is_err());
        let t = Tensor::new(&[2, 3], vec![0.0; 6]).unwrap();
        assert!(t.dims4().is_err());
        assert!(t.set_values(&[1.0]).is_err());
        assert_eq!(Tensor::scalar(3.0).item(), 3.0);
    }

    #[test]
    fn detach_cuts_tracking() {
        let p = Tensor::parameter(&[2], vec![1.0, 2.0]).unwrap();
        let d = p.detach();
        assert!(!d.requires_grad());
        assert_eq!(d.to_vec(), p.to_vec());
    }

    #[test]
    fn non_finite_detection() {
        let t = Tensor::new(&[2], vec![1.0, f64::NAN]).unwrap();
        assert!(matches!(t.ensure_finite("x"), Err(Error::NonFinite(_))));
    }
}
