//! MLP-to-mesh embedding against a hand-written feedforward pass.

use mnn_core::mlp::Mlp;
use mnn_core::topology::embed_mlp;
use mnn_core::{rng, Dims};
use rand::Rng;

/// Feedforward evaluation written directly from the weight tensors.
fn reference_forward(mlp: &Mlp, x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    for (w, b) in mlp.weights().iter().zip(mlp.biases()) {
        a = (0..w.rows())
            .map(|r| {
                let z: f64 = (0..w.cols()).map(|c| w.get(r, c) * a[c]).sum::<f64>() + b[r];
                1.0 / (1.0 + (-z).exp())
            })
            .collect();
    }
    a
}

#[test]
fn embedded_mesh_reproduces_mlp() {
    for seed in 0..5u64 {
        let mut rng = rng::stream(seed, &[]);
        let hidden = [7usize, 5, 4, 2];
        let sizes = [6, hidden[0], hidden[1], hidden[2], hidden[3], 3];
        let mlp = Mlp::random(&sizes, &mut rng).unwrap();
        let dims = Dims::new(6, hidden.iter().sum(), 3, 4);
        let (mesh, mask) = embed_mlp(&mlp, dims).unwrap();
        assert!(mask.is_all_true());
        for _ in 0..50 {
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
            let want = reference_forward(&mlp, &x);
            let got = mesh.forward(&x).unwrap();
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12, "{g} vs {w}");
            }
        }
    }
}

#[test]
fn four_hidden_layers_fill_default_mesh() {
    let mut rng = rng::stream(1, &[]);
    let mlp = Mlp::random(&[512, 128, 64, 32, 16, 3], &mut rng).unwrap();
    let (mesh, _) = embed_mlp(&mlp, Dims::default()).unwrap();
    assert_eq!(mesh.dims(), Dims::default());
    let x: Vec<f64> = (0..512).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (got, want) = (mesh.forward(&x).unwrap(), reference_forward(&mlp, &x));
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() < 1e-12);
    }
}
