//! Analytic gradients against central finite differences.

use aopath::classifier::{build_question_graph, PreparedQuestion};
use aopath::harness::{generate_synthetic, Signal, SyntheticSpec, SyntheticWorld, WorldSpec};
use aopath::network::{ModelParams, PathwayConfig, Variant};
use aopath::numerics::{bilstm, LstmWeights, ParamGrads, Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .unwrap()
        .requiring_grad()
}

/// Checks every coordinate (or `max_coords` sampled ones) of every parameter.
fn check<F>(params: &mut [Tensor], loss: F, tol: f64, max_coords: usize, rng: &mut ChaCha8Rng) -> f64
where
    F: Fn(&[Tensor], Option<&mut ParamGrads>) -> f64,
{
    let mut grads = ParamGrads::new(params.len());
    loss(params, Some(&mut grads));
    let mut worst: f64 = 0.0;
    for p in 0..params.len() {
        let len = params[p].len();
        let coords: Vec<usize> = if len <= max_coords {
            (0..len).collect()
        } else {
            (0..max_coords).map(|_| rng.random_range(0..len)).collect()
        };
        for k in coords {
            let orig = params[p].data()[k];
            params[p].data_mut()[k] = orig + H;
            let up = loss(params, None);
            params[p].data_mut()[k] = orig - H;
            let down = loss(params, None);
            params[p].data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * H);
            let analytic = grads.get(p).map_or(0.0, |g| g[k]);
            let e = rel_err(analytic, numeric);
            assert!(e < tol, "param {p} coord {k}: analytic {analytic} numeric {numeric} (rel {e})");
            worst = worst.max(e);
        }
    }
    worst
}

#[test]
fn affine_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let mut params = vec![
            random_tensor(&mut rng, &[7]),
            random_tensor(&mut rng, &[3, 7]),
            random_tensor(&mut rng, &[3]),
            random_tensor(&mut rng, &[3]),
        ];
        let loss = |p: &[Tensor], g: Option<&mut ParamGrads>| {
            let mut tape = Tape::new(p);
            let y = tape.affine(Var::Param(0), Var::Param(1), Var::Param(2)).unwrap();
            // a fixed random projection makes the loss depend on every output
            let s = tape.cosine(y, Var::Param(3)).unwrap();
            let y0 = tape.slice(y, 0, 1).unwrap();
            let l = tape.sum(&[s, y0]).unwrap();
            if let Some(g) = g {
                tape.backward(l, g).unwrap();
            }
            tape.scalar(l)
        };
        check(&mut params, loss, 1e-6, usize::MAX, &mut rng);
    }
}

#[test]
fn lstm_cell_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let (hid, input) = (2, 3);
        let mut params = vec![
            random_tensor(&mut rng, &[input]),
            random_tensor(&mut rng, &[hid]),
            random_tensor(&mut rng, &[hid]),
            random_tensor(&mut rng, &[4 * hid, input]),
            random_tensor(&mut rng, &[4 * hid, hid]),
            random_tensor(&mut rng, &[4 * hid]),
            random_tensor(&mut rng, &[4 * hid]),
        ];
        let loss = |p: &[Tensor], g: Option<&mut ParamGrads>| {
            let mut tape = Tape::new(p);
            let w = LstmWeights {
                w_ih: Var::Param(3),
                w_hh: Var::Param(4),
                b_ih: Var::Param(5),
                b_hh: Var::Param(6),
            };
            let (h, c) = tape.lstm_cell(Var::Param(0), Var::Param(1), Var::Param(2), w).unwrap();
            // sum(h') + sum(c') through a fixed ones row
            let hc = tape.concat(&[h, c]).unwrap();
            let ones = tape.leaf(&Tensor::new(vec![1, 2 * hid], vec![1.0; 2 * hid]).unwrap());
            let zero = tape.zeros(1);
            let l = tape.affine(hc, ones, zero).unwrap();
            if let Some(g) = g {
                tape.backward(l, g).unwrap();
            }
            tape.scalar(l)
        };
        check(&mut params, loss, 1e-5, usize::MAX, &mut rng);
    }
}

#[test]
fn bilstm_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (len, input, hid) = (5, 8, 4);
    for _ in 0..5 {
        let mut params: Vec<Tensor> = (0..len).map(|_| random_tensor(&mut rng, &[input])).collect();
        for _ in 0..2 {
            params.push(random_tensor(&mut rng, &[4 * hid, input]));
            params.push(random_tensor(&mut rng, &[4 * hid, hid]));
            params.push(random_tensor(&mut rng, &[4 * hid]));
            params.push(random_tensor(&mut rng, &[4 * hid]));
        }
        params.push(random_tensor(&mut rng, &[2 * hid]));
        let loss = |p: &[Tensor], g: Option<&mut ParamGrads>| {
            let mut tape = Tape::new(p);
            let seq: Vec<Var> = (0..len).map(Var::Param).collect();
            let lw = |o: usize| LstmWeights {
                w_ih: Var::Param(o),
                w_hh: Var::Param(o + 1),
                b_ih: Var::Param(o + 2),
                b_hh: Var::Param(o + 3),
            };
            let rep = bilstm(&mut tape, &seq, lw(len), lw(len + 4)).unwrap();
            let l = tape.cosine(rep, Var::Param(len + 8)).unwrap();
            if let Some(g) = g {
                tape.backward(l, g).unwrap();
            }
            tape.scalar(l)
        };
        check(&mut params, loss, 1e-5, usize::MAX, &mut rng);
    }
}

#[test]
fn cross_entropy_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let logits: Vec<f64> = (0..5).map(|_| rng.random_range(-5.0..5.0)).collect();
        let gold = rng.random_range(0..5);
        let params = vec![Tensor::vector(logits.clone()).unwrap().requiring_grad()];
        let mut tape = Tape::new(&params);
        let l = tape.softmax_cross_entropy(Var::Param(0), gold).unwrap();
        let mut g = ParamGrads::new(1);
        tape.backward(l, &mut g).unwrap();
        let m = logits.iter().cloned().fold(f64::MIN, f64::max);
        let z: f64 = logits.iter().map(|v| (v - m).exp()).sum();
        for (i, v) in logits.iter().enumerate() {
            let expect = (v - m).exp() / z - if i == gold { 1.0 } else { 0.0 };
            assert!((g.get(0).unwrap()[i] - expect).abs() < 1e-10);
        }
    }
}

/// Full question loss for every parameter group of each variant.
#[test]
fn question_loss_gradients() {
    let world = SyntheticWorld::new(WorldSpec {
        n_actions: 60,
        n_objects: 80,
        seed: 5,
        ..WorldSpec::default()
    })
    .unwrap();
    let rec = &generate_synthetic(&SyntheticSpec::new(1, 9, Signal::Pathway).with_genres(&["x"]), &world).unwrap()[0];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for variant in Variant::ALL {
        let mut cfg = PathwayConfig::preset(variant);
        cfg.k = 4;
        let mut model = ModelParams::init(&cfg, 11).unwrap();
        let q = PreparedQuestion::new(rec, &cfg, &world.lexicon).unwrap();
        let shadow = model.clone();
        let loss = |p: &[Tensor], g: Option<&mut ParamGrads>| {
            let mut tape = Tape::new(p);
            let graph = build_question_graph(&mut tape, &q, &shadow).unwrap();
            let l = tape.softmax_cross_entropy(graph.logits, q.gold).unwrap();
            if let Some(g) = g {
                tape.backward(l, g).unwrap();
            }
            tape.scalar(l)
        };
        let coords = if variant == Variant::AopathB { 8 } else { 40 };
        let worst = check(model.tensors_mut(), loss, 1e-4, coords, &mut rng);
        eprintln!("{variant}: worst relative error {worst:.2e}");
    }
}
