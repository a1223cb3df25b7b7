use ndarray::{Array2, Zip};

use super::{Activation, DropoutMask, GcnnWeights};
use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, LabelSet, PropagationMatrix};
use crate::scalar::Scalar;
use crate::sparse::Csr;

pub(crate) const LOG_FLOOR: f64 = 1e-12;

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Forward<T> {
    x_masked: Option<Csr<T>>,
    pre: Array2<T>,
    pub hidden: Array2<T>,
    hidden_masked: Array2<T>,
    pub logits: Array2<T>,
    pub softmax: Array2<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub w0: Array2<T>,
    pub w1: Array2<T>,
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows<T: Scalar>(logits: &Array2<T>) -> Array2<T> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    out
}

fn check_shapes<T: Scalar>(
    w: &GcnnWeights<T>,
    a: &PropagationMatrix<T>,
    x: &FeatureMatrix<T>,
    masks: Option<&DropoutMask<T>>,
) -> Result<()> {
    let n = a.n_nodes();
    if x.n_rows() != n {
        return Err(Error::Shape(format!("{} feature rows for {n} nodes", x.n_rows())));
    }
    if w.w0.nrows() != x.dim() {
        return Err(Error::Shape(format!(
            "W0 has {} rows, features have dimension {}",
            w.w0.nrows(),
            x.dim()
        )));
    }
    if w.w0.ncols() != w.w1.nrows() {
        return Err(Error::Shape(format!(
            "W0 is {:?} but W1 is {:?}",
            w.w0.dim(),
            w.w1.dim()
        )));
    }
    if let Some(m) = masks {
        if m.input.len() != x.as_csr().nnz() || m.hidden.dim() != (n, w.hidden()) {
            return Err(Error::Shape("dropout mask does not match inputs".into()));
        }
    }
    Ok(())
}

/// Forward pass; `masks = None` is the deterministic inference pass.
pub fn forward<T: Scalar>(
    w: &GcnnWeights<T>,
    act: Activation,
    a: &PropagationMatrix<T>,
    x: &FeatureMatrix<T>,
    masks: Option<&DropoutMask<T>>,
) -> Result<Forward<T>> {
    check_shapes(w, a, x, masks)?;
    let x_masked = masks
        .map(|m| {
            let vals = x.as_csr().values().iter().zip(&m.input).map(|(&v, &k)| v * k).collect();
            x.as_csr().with_values(vals)
        })
        .transpose()?;
    let xm = x_masked.as_ref().unwrap_or(x.as_csr());
    let xw = xm.matmul(&w.w0.view())?;
    let pre = a.as_csr().matmul(&xw.view())?;
    let hidden = pre.mapv(|v| act.apply(v));
    let hidden_masked = match masks {
        Some(m) => &hidden * &m.hidden,
        None => hidden.clone(),
    };
    let hw = hidden_masked.dot(&w.w1);
    let logits = a.as_csr().matmul(&hw.view())?;
    let softmax = softmax_rows(&logits);
    Ok(Forward {
        x_masked,
        pre,
        hidden,
        hidden_masked,
        logits,
        softmax,
    })
}

/// Mean cross-entropy over train nodes (log clamped at 1e-12) plus `l2/2 · ‖W0‖²`.
pub fn loss<T: Scalar>(z: &Array2<T>, labels: &LabelSet, w: &GcnnWeights<T>, l2: T) -> T {
    let train = labels.train();
    let floor = T::of(LOG_FLOOR);
    let ce = if train.is_empty() {
        T::zero()
    } else {
        let s: T = train
            .iter()
            .map(|&i| -z[[i, labels.label(i).expect("train nodes are labeled")]].max(floor).ln())
            .sum();
        s / T::of_usize(train.len())
    };
    ce + l2 * T::of(0.5) * w.w0.iter().map(|&v| v * v).sum()
}

/// Exact gradient of [`loss`] (outside the clamped region) for fixed masks.
/// Returns the gradients together with the forward pass they were computed from.
pub fn backward<T: Scalar>(
    w: &GcnnWeights<T>,
    act: Activation,
    a: &PropagationMatrix<T>,
    x: &FeatureMatrix<T>,
    labels: &LabelSet,
    l2: T,
    masks: Option<&DropoutMask<T>>,
) -> Result<(Gradients<T>, Forward<T>)> {
    backward_scaled(w, act, a, x, labels, T::one(), l2, masks)
}

/// Gradient of `ce_scale · CE + l2/2 · ‖W0‖²`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn backward_scaled<T: Scalar>(
    w: &GcnnWeights<T>,
    act: Activation,
    a: &PropagationMatrix<T>,
    x: &FeatureMatrix<T>,
    labels: &LabelSet,
    ce_scale: T,
    l2: T,
    masks: Option<&DropoutMask<T>>,
) -> Result<(Gradients<T>, Forward<T>)> {
    if labels.n_nodes() != a.n_nodes() {
        return Err(Error::Shape(format!(
            "{} labels for {} nodes",
            labels.n_nodes(),
            a.n_nodes()
        )));
    }
    let fwd = forward(w, act, a, x, masks)?;
    let train = labels.train();
    let mut dlogits = Array2::<T>::zeros(fwd.logits.dim());
    if !train.is_empty() {
        let scale = ce_scale / T::of_usize(train.len());
        for &i in train {
            let y = labels.label(i).expect("train nodes are labeled");
            let mut row = dlogits.row_mut(i);
            row.assign(&fwd.softmax.row(i));
            row[y] -= T::one();
            row.mapv_inplace(|v| v * scale);
        }
    }
    let g = a.as_csr().t_matmul(&dlogits.view())?;
    let dw1 = fwd.hidden_masked.t().dot(&g);
    let mut dh = g.dot(&w.w1.t());
    if let Some(m) = masks {
        dh *= &m.hidden;
    }
    Zip::from(&mut dh)
        .and(&fwd.pre)
        .for_each(|d, &p| *d = *d * act.derivative(p));
    let dxw = a.as_csr().t_matmul(&dh.view())?;
    let xm = fwd.x_masked.as_ref().unwrap_or(x.as_csr());
    let mut dw0 = xm.t_matmul(&dxw.view())?;
    dw0.scaled_add(l2, &w.w0);
    Ok((Gradients { w0: dw0, w1: dw1 }, fwd))
}
