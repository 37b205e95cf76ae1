//! Forward semantics, shape errors, and backward on hand-derived cases.

use autodiff::{ParamStore, Tape, TensorError};

fn tape_with(shape: &[usize], data: &[f64]) -> (Tape, autodiff::Value) {
    let mut t = Tape::new();
    let v = t.leaf(shape, data.to_vec()).unwrap();
    (t, v)
}

#[test]
fn matmul_identity_passthrough() {
    let mut t = Tape::new();
    let eye = t.constant(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    let a = t.constant(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    let out = t.matmul(eye, a).unwrap();
    assert_eq!(t.data(out), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
}

#[test]
fn matmul_hand_case() {
    let mut t = Tape::new();
    let a = t.constant(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let b = t.constant(&[2, 1], vec![5.0, 6.0]).unwrap();
    let out = t.matmul(a, b).unwrap();
    assert_eq!(t.shape(out), &[2, 1]);
    assert_eq!(t.data(out), &[17.0, 39.0]);
}

#[test]
fn matmul_shape_mismatch_names_op() {
    let mut t = Tape::new();
    let a = t.constant(&[2, 3], vec![0.0; 6]).unwrap();
    let b = t.constant(&[2, 2], vec![0.0; 4]).unwrap();
    let err = t.matmul(a, b).unwrap_err();
    match err {
        TensorError::Shape { op, detail } => {
            assert_eq!(op, "matmul");
            assert!(detail.contains("[2, 3]") && detail.contains("[2, 2]"), "detail: {}", detail);
        }
        other => panic!("expected shape error, got {other:?}"),
    }
}

#[test]
fn softmax_singleton_axis_is_one() {
    let mut t = Tape::new();
    let x = t.constant(&[1, 1], vec![3.7]).unwrap();
    let s = t.softmax(x, 1).unwrap();
    assert_eq!(t.data(s), &[1.0]);
}

#[test]
fn softmax_empty_axis_is_domain_error() {
    let mut t = Tape::new();
    let x = t.constant(&[2, 0], vec![]).unwrap();
    assert!(matches!(t.softmax(x, 1), Err(TensorError::Domain(_))));
}

#[test]
fn softmax_rows_sum_to_one_and_nonnegative() {
    let mut t = Tape::new();
    let x = t
        .constant(&[3, 4], vec![0.3, -2.0, 5.0, 1.0, 0.0, 0.0, 0.0, 0.0, -9.0, 4.0, 2.0, 1.5])
        .unwrap();
    let s = t.softmax(x, 1).unwrap();
    for i in 0..3 {
        let row = &t.data(s)[i * 4..(i + 1) * 4];
        assert!(row.iter().all(|&v| v >= 0.0));
        let total: f64 = row.iter().sum();
        assert!((total - 1.0).abs() < 1e-12, "row {} sums to {}", i, total);
    }
}

#[test]
fn backward_square_sum() {
    let (mut t, x) = tape_with(&[2], &[1.0, 2.0]);
    let sq = t.mul(x, x).unwrap();
    let root = t.sum(sq, None).unwrap();
    let mut store = ParamStore::new();
    t.backward(root, &mut store).unwrap();
    assert_eq!(t.grad(x).unwrap(), &[2.0, 4.0]);
}

#[test]
fn backward_relu_gate() {
    let (mut t, x) = tape_with(&[2], &[-1.0, 3.0]);
    let r = t.relu(x);
    let root = t.sum(r, None).unwrap();
    let mut store = ParamStore::new();
    t.backward(root, &mut store).unwrap();
    assert_eq!(t.grad(x).unwrap(), &[0.0, 1.0]);
}

#[test]
fn backward_sigmoid_at_zero() {
    let (mut t, x) = tape_with(&[1], &[0.0]);
    let s = t.sigmoid(x);
    let root = t.sum(s, None).unwrap();
    let mut store = ParamStore::new();
    t.backward(root, &mut store).unwrap();
    assert!((t.grad(x).unwrap()[0] - 0.25).abs() < 1e-15);
}

#[test]
fn backward_fan_out_accumulates() {
    // y = sum(x) + sum(x .* x): grad = 1 + 2x on each entry.
    let (mut t, x) = tape_with(&[3], &[1.0, -2.0, 0.5]);
    let s1 = t.sum(x, None).unwrap();
    let sq = t.mul(x, x).unwrap();
    let s2 = t.sum(sq, None).unwrap();
    let root = t.add(s1, s2).unwrap();
    let mut store = ParamStore::new();
    t.backward(root, &mut store).unwrap();
    let g = t.grad(x).unwrap();
    for (gi, xi) in g.iter().zip([1.0, -2.0, 0.5]) {
        assert!((gi - (1.0 + 2.0 * xi)).abs() < 1e-12);
    }
}

#[test]
fn backward_rejects_non_scalar_root() {
    let (mut t, x) = tape_with(&[2], &[1.0, 2.0]);
    let y = t.mul(x, x).unwrap();
    let mut store = ParamStore::new();
    assert!(matches!(t.backward(y, &mut store), Err(TensorError::Contract(_))));
}

#[test]
fn index_select_and_scatter_add_roundtrip() {
    let mut t = Tape::new();
    let m = t.constant(&[3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    let sel = t.index_select(m, &[2, 0, 2]).unwrap();
    assert_eq!(t.data(sel), &[5.0, 6.0, 1.0, 2.0, 5.0, 6.0]);
    let scat = t.scatter_add(sel, &[0, 1, 0], 2).unwrap();
    // row 0 receives rows 0 and 2 of sel: [5+5, 6+6]
    assert_eq!(t.data(scat), &[10.0, 12.0, 1.0, 2.0]);
}

#[test]
fn concat_and_slice_roundtrip_both_axes() {
    let mut t = Tape::new();
    let a = t.constant(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let b = t.constant(&[2, 1], vec![9.0, 8.0]).unwrap();
    let cat = t.concat(1, &[a, b]).unwrap();
    assert_eq!(t.data(cat), &[1.0, 2.0, 9.0, 3.0, 4.0, 8.0]);
    let back = t.slice(cat, 1, 0, 2).unwrap();
    assert_eq!(t.data(back), t.data(a));

    let cat0 = t.concat(0, &[a, a]).unwrap();
    let back0 = t.slice(cat0, 0, 2, 4).unwrap();
    assert_eq!(t.data(back0), t.data(a));
}

#[test]
fn broadcast_add_bias_adds_rowwise() {
    let mut t = Tape::new();
    let x = t.constant(&[2, 3], vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
    let b = t.constant(&[3], vec![0.5, -1.0, 2.0]).unwrap();
    let y = t.broadcast_add_bias(x, b).unwrap();
    assert_eq!(t.data(y), &[0.5, -1.0, 2.0, 1.5, 0.0, 3.0]);
}

#[test]
fn reductions_match_hand_values() {
    let mut t = Tape::new();
    let x = t.constant(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    let s0 = t.sum(x, Some(0)).unwrap();
    assert_eq!(t.shape(s0), &[1, 3]);
    assert_eq!(t.data(s0), &[5.0, 7.0, 9.0]);
    let m1 = t.mean(x, Some(1)).unwrap();
    assert_eq!(t.shape(m1), &[2, 1]);
    assert_eq!(t.data(m1), &[2.0, 5.0]);
    let all = t.mean(x, None).unwrap();
    assert_eq!(t.data(all), &[3.5]);
}

#[test]
fn dropout_identity_at_zero_rate_and_masks_otherwise() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut t = Tape::new();
    let x = t.constant(&[1, 100], vec![1.0; 100]).unwrap();
    let id = t.dropout(x, 0.0, &mut rng).unwrap();
    assert_eq!(t.data(id), &[1.0; 100][..]);
    let dropped = t.dropout(x, 0.5, &mut rng).unwrap();
    let zeros = t.data(dropped).iter().filter(|&&v| v == 0.0).count();
    assert!(zeros > 20 && zeros < 80, "zeros = {}", zeros);
    // surviving entries carry the 1/(1-p) scale
    assert!(t.data(dropped).iter().all(|&v| v == 0.0 || (v - 2.0).abs() < 1e-15));
}

#[test]
fn identical_seed_and_op_sequence_is_bit_identical() {
    use rand::SeedableRng;
    let run = || {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let mut t = Tape::new();
        let data = autodiff::uniform(12, -1.0, 1.0, &mut rng);
        let x = t.leaf(&[3, 4], data).unwrap();
        let w_data = autodiff::glorot_uniform(4, 2, &mut rng);
        let w = t.leaf(&[4, 2], w_data).unwrap();
        let h = t.matmul(x, w).unwrap();
        let a = t.tanh(h);
        let d = t.dropout(a, 0.3, &mut rng).unwrap();
        let loss = t.sum(d, None).unwrap();
        let mut store = ParamStore::new();
        t.backward(loss, &mut store).unwrap();
        (t.data(d).to_vec(), t.grad(x).unwrap().to_vec())
    };
    let (d1, g1) = run();
    let (d2, g2) = run();
    assert!(d1.iter().zip(&d2).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert!(g1.iter().zip(&g2).all(|(a, b)| a.to_bits() == b.to_bits()));
}
