//! Inference-mode forward pass of the sparse graph network.
//!
//! Inputs: node coordinates shifted to the origin and divided by the longer
//! bounding-box side (so they land in the unit square), and each sparse
//! edge's integer distance divided by the bounding-box diagonal.

use ndarray::{s, Array1, Array2, ArrayView1, Axis, Zip};

use super::weights::{BatchNorm, SgnLayer, SgnWeights, WeightsError};
use super::{softmax_into, EdgeScores, NodePenalties};
use crate::graph::SparseGraph;
use crate::instance::{Node, TspInstance};

pub fn sgn_forward(
    graph: &SparseGraph,
    inst: &TspInstance,
    w: &SgnWeights,
) -> Result<(EdgeScores, NodePenalties), WeightsError> {
    w.validate()?;
    let n = inst.n();
    if graph.n() != n {
        return Err(WeightsError::DimensionMismatch(format!(
            "graph has {} nodes, instance has {n}",
            graph.n()
        )));
    }
    let k = graph.degree();
    let targets = graph.flat_targets();
    let reverse = graph.reverse_index();

    let (x_nodes, x_edges) = features(graph, inst);
    let mut v = x_nodes.dot(&w.node_in_w.t()) + &w.node_in_b;
    let mut e = x_edges.dot(&w.edge_in_w.t()) + &w.edge_in_b;

    for layer in &w.layers {
        let (v_next, e_next) = sgn_layer(layer, &v, &e, k, targets, &reverse);
        v = v_next;
        e = e_next;
    }

    let mut h = e.dot(&w.dec1_w.t()) + &w.dec1_b;
    h.mapv_inplace(relu);
    let mut h = h.dot(&w.dec2_w.t()) + &w.dec2_b;
    h.mapv_inplace(relu);
    let logits = h.dot(&w.w_beta);

    let mut beta = Vec::with_capacity(graph.edge_count());
    let mut row = vec![0.0f64; k];
    for i in 0..n {
        for (r, &l) in row.iter_mut().zip(logits.slice(s![i * k..(i + 1) * k])) {
            *r = l as f64;
        }
        softmax_into(&row, &mut beta);
    }

    let c = w.penalty_bound as f64;
    let pi: Vec<f64> = v
        .dot(&w.w_pi)
        .iter()
        .map(|&z| (c * (z as f64).tanh()).clamp(-c, c))
        .collect();

    Ok((EdgeScores::new(graph, beta), NodePenalties::new(pi, c)))
}

fn features(graph: &SparseGraph, inst: &TspInstance) -> (Array2<f32>, Array2<f32>) {
    let (min_x, min_y, max_x, max_y) = inst.bounding_box();
    let (w, h) = (max_x - min_x, max_y - min_y);
    let side = if w.max(h) > 0.0 { w.max(h) } else { 1.0 };
    let diag = if w.hypot(h) > 0.0 { w.hypot(h) } else { 1.0 };
    let mut x_nodes = Array2::zeros((inst.n(), 2));
    for (i, &(x, y)) in inst.coords().iter().enumerate() {
        x_nodes[[i, 0]] = ((x - min_x) / side) as f32;
        x_nodes[[i, 1]] = ((y - min_y) / side) as f32;
    }
    let x_edges = Array2::from_shape_fn((graph.edge_count(), 1), |(idx, _)| {
        (graph.flat_distances()[idx] as f64 / diag) as f32
    });
    (x_nodes, x_edges)
}

fn sgn_layer(
    layer: &SgnLayer,
    v: &Array2<f32>,
    e: &Array2<f32>,
    k: usize,
    targets: &[Node],
    reverse: &[Option<usize>],
) -> (Array2<f32>, Array2<f32>) {
    let n = v.nrows();
    let dim = v.ncols();

    // Attention: element-wise softmax of W_a e over each node's out-edges.
    let mut att = e.dot(&layer.w_a.t());
    for i in 0..n {
        let mut block = att.slice_mut(s![i * k..(i + 1) * k, ..]);
        for mut col in block.axis_iter_mut(Axis(1)) {
            let max = col.fold(f32::NEG_INFINITY, |m, &x| m.max(x));
            col.mapv_inplace(|x| (x - max).exp());
            let sum = col.sum();
            col.mapv_inplace(|x| x / sum);
        }
    }

    // Node update.
    let msg = v.dot(&layer.w_n.t());
    let mut node_pre = v.dot(&layer.w_s.t());
    for i in 0..n {
        let mut acc = node_pre.row_mut(i);
        for slot in 0..k {
            let edge = i * k + slot;
            let j = targets[edge] as usize;
            Zip::from(&mut acc)
                .and(att.row(edge))
                .and(msg.row(j))
                .for_each(|a, &w, &m| *a += w * m);
        }
    }
    let v_next = activate(node_pre, &layer.node_bn) + v;

    // Edge update, with the reverse edge's projection (or the padding vector).
    let from = v.dot(&layer.w_f.t());
    let to = v.dot(&layer.w_t.t());
    let own = e.dot(&layer.w_o.t());
    let rev_all = e.dot(&layer.w_r.t());
    let rev_pad: Array1<f32> = layer.w_r.dot(&layer.pad);
    let mut edge_pre = own;
    for i in 0..n {
        for slot in 0..k {
            let edge = i * k + slot;
            let j = targets[edge] as usize;
            let r: ArrayView1<f32> = match reverse[edge] {
                Some(back) => rev_all.row(back),
                None => rev_pad.view(),
            };
            Zip::from(edge_pre.row_mut(edge))
                .and(from.row(i))
                .and(to.row(j))
                .and(r)
                .for_each(|acc, &a, &b, &c| *acc += a + b + c);
        }
    }
    debug_assert_eq!(edge_pre.ncols(), dim);
    let e_next = activate(edge_pre, &layer.edge_bn) + e;
    (v_next, e_next)
}

/// ReLU followed by inference-mode batch normalisation.
fn activate(mut x: Array2<f32>, bn: &BatchNorm) -> Array2<f32> {
    let inv_std = bn.var.mapv(|v| 1.0 / (v + BatchNorm::EPS).sqrt());
    for mut row in x.rows_mut() {
        Zip::from(&mut row)
            .and(&bn.mean)
            .and(&inv_std)
            .and(&bn.scale)
            .and(&bn.shift)
            .for_each(|x, &m, &is, &g, &b| *x = (relu(*x) - m) * is * g + b);
    }
    x
}

#[inline]
fn relu(x: f32) -> f32 {
    x.max(0.0)
}
