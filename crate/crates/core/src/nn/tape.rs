//! Tape-based reverse-mode differentiation over [`Tensor`] values.
//!
//! Operations are appended to a [`Tape`] during the forward pass; each
//! returns a [`Var`] handle. [`Tape::backward`] walks the tape in reverse
//! from a scalar node and returns a [`Gradients`] table.

use std::sync::atomic::{AtomicU64, Ordering};

use super::conv::{self, ConvDims};
use crate::error::{Error, Result};
use crate::losses::{EvidentialLoss, LossBreakdown};
use crate::tensor::Tensor;

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a node recorded on a specific tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    tape: u64,
    index: usize,
}

enum Op {
    Leaf,
    Conv2d {
        input: usize,
        weight: usize,
        bias: usize,
        dims: ConvDims,
    },
    Relu(usize),
    Sum(usize),
    Scale(usize, f64),
    /// Evidential loss of a logit node; the gradient is computed eagerly.
    Evidential { logits: usize, grad: Vec<f64> },
}

struct Node {
    value: Tensor,
    op: Op,
}

pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var {
            tape: self.id,
            index: self.nodes.len() - 1,
        }
    }

    fn resolve(&self, v: Var) -> Result<usize> {
        if v.tape != self.id || v.index >= self.nodes.len() {
            return Err(Error::NotRecorded(v.index));
        }
        Ok(v.index)
    }

    pub fn value(&self, v: Var) -> Result<&Tensor> {
        Ok(&self.nodes[self.resolve(v)?].value)
    }

    /// Records an input or parameter. The gradient slot of `value` is dropped.
    pub fn leaf(&mut self, mut value: Tensor) -> Var {
        value.clear_grad();
        self.push(value, Op::Leaf)
    }

    /// Same-padded, stride-1 convolution: `[N,Ci,H,W] * [Co,Ci,K,K] + [Co]`.
    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let (ii, wi, bi) = (self.resolve(input)?, self.resolve(weight)?, self.resolve(bias)?);
        let x = &self.nodes[ii].value;
        let w = &self.nodes[wi].value;
        let b = &self.nodes[bi].value;
        x.expect_rank(4)?;
        w.expect_rank(4)?;
        let (xs, ws) = (x.shape(), w.shape());
        if ws[1] != xs[1] || ws[2] != ws[3] || ws[2] % 2 == 0 {
            return Err(Error::ShapeMismatch {
                expected: vec![ws[0], xs[1], ws[2], ws[2]],
                found: ws.to_vec(),
            });
        }
        b.expect_shape(&[ws[0]])?;
        let dims = ConvDims {
            n: xs[0],
            c_in: xs[1],
            c_out: ws[0],
            h: xs[2],
            w: xs[3],
            k: ws[2],
        };
        let mut out = Tensor::zeros(vec![dims.n, dims.c_out, dims.h, dims.w]);
        conv::forward(dims, x.data(), w.data(), b.data(), out.data_mut());
        Ok(self.push(
            out,
            Op::Conv2d {
                input: ii,
                weight: wi,
                bias: bi,
                dims,
            },
        ))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let xi = self.resolve(x)?;
        let src = &self.nodes[xi].value;
        let data = src.data().iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
        let out = Tensor::new(src.shape().to_vec(), data)?;
        Ok(self.push(out, Op::Relu(xi)))
    }

    /// Sum of all elements as a scalar node.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let xi = self.resolve(x)?;
        let s = self.nodes[xi].value.data().iter().sum();
        Ok(self.push(Tensor::scalar(s), Op::Sum(xi)))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Result<Var> {
        let xi = self.resolve(x)?;
        let src = &self.nodes[xi].value;
        let data = src.data().iter().map(|v| v * factor).collect();
        let out = Tensor::new(src.shape().to_vec(), data)?;
        Ok(self.push(out, Op::Scale(xi, factor)))
    }

    /// Scalar evidential loss of a `[N, C, H, W]` logit node against `[N, H, W]` labels.
    pub fn evidential_loss(
        &mut self,
        logits: Var,
        labels: &[u8],
        loss: &EvidentialLoss,
        iteration: u64,
    ) -> Result<(Var, LossBreakdown)> {
        let li = self.resolve(logits)?;
        let (breakdown, grad) = loss.evaluate_with_gradient(&self.nodes[li].value, labels, iteration)?;
        let var = self.push(
            Tensor::scalar(breakdown.total),
            Op::Evidential {
                logits: li,
                grad: grad.into_data(),
            },
        );
        Ok((var, breakdown))
    }

    /// Reverse pass from a scalar node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let root = self.resolve(loss)?;
        if self.nodes[root].value.len() != 1 {
            return Err(Error::ShapeMismatch {
                expected: vec![],
                found: self.nodes[root].value.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; root + 1];
        grads[root] = Some(vec![1.0]);

        for idx in (0..=root).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::Conv2d {
                    input,
                    weight,
                    bias,
                    dims,
                } => {
                    let x = &self.nodes[*input].value;
                    let w = &self.nodes[*weight].value;
                    let mut gi = vec![0.0; x.len()];
                    let mut gw = vec![0.0; w.len()];
                    let mut gb = vec![0.0; dims.c_out];
                    conv::backward(*dims, x.data(), w.data(), &g, &mut gi, &mut gw, &mut gb);
                    accumulate(&mut grads, *input, gi);
                    accumulate(&mut grads, *weight, gw);
                    accumulate(&mut grads, *bias, gb);
                }
                Op::Relu(x) => {
                    let src = self.nodes[*x].value.data();
                    let gx = g
                        .iter()
                        .zip(src)
                        .map(|(g, &v)| if v > 0.0 { *g } else { 0.0 })
                        .collect();
                    accumulate(&mut grads, *x, gx);
                }
                Op::Sum(x) => {
                    let n = self.nodes[*x].value.len();
                    accumulate(&mut grads, *x, vec![g[0]; n]);
                }
                Op::Scale(x, f) => {
                    accumulate(&mut grads, *x, g.iter().map(|v| v * f).collect());
                }
                Op::Evidential { logits, grad } => {
                    accumulate(&mut grads, *logits, grad.iter().map(|v| v * g[0]).collect());
                }
            }
            // leaves keep their gradient for lookup
            if matches!(node.op, Op::Leaf) {
                grads[idx] = Some(g);
            }
        }
        Ok(Gradients {
            tape: self.id,
            grads,
        })
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], idx: usize, g: Vec<f64>) {
    match &mut grads[idx] {
        Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
        slot @ None => *slot = Some(g),
    }
}

/// Gradients of one backward pass, keyed by leaf [`Var`].
pub struct Gradients {
    tape: u64,
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient of a leaf; `None` when the leaf does not influence the loss.
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        if v.tape != self.tape {
            return None;
        }
        self.grads.get(v.index).and_then(|g| g.as_deref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backward_requires_recorded_node() {
        let mut a = Tape::new();
        let b = Tape::new();
        let x = a.leaf(Tensor::scalar(2.0));
        assert!(matches!(b.backward(x), Err(Error::NotRecorded(_))));
        let s = a.sum(x).unwrap();
        assert!(a.backward(s).is_ok());
    }

    #[test]
    fn non_scalar_root_rejected() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::zeros(vec![3]));
        assert!(t.backward(x).is_err());
    }

    #[test]
    fn scale_and_sum() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::new(vec![3], vec![1.0, -2.0, 3.0]).unwrap());
        let r = t.relu(x).unwrap();
        let s = t.scale(r, 2.0).unwrap();
        let l = t.sum(s).unwrap();
        assert_eq!(t.value(l).unwrap().item(), Some(8.0));
        let g = t.backward(l).unwrap();
        assert_eq!(g.get(x).unwrap(), &[2.0, 0.0, 2.0]);
    }

    #[test]
    fn unused_leaf_has_no_gradient() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::scalar(1.0));
        let y = t.leaf(Tensor::scalar(5.0));
        let l = t.sum(x).unwrap();
        let g = t.backward(l).unwrap();
        assert!(g.get(y).is_none());
    }
}
