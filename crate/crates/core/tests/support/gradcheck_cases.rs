//! Central finite differences against the reverse pass, for every op kind and
//! every composite loss. A gradient passes when the norm-wise relative error
//! `‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖)` is at most 1e-4
//! (both norms below 1e-8 count as agreement).

use cail_core::diff::{Binding, Matrix, OpKind, ParamId, ParamStore, Tape, Var};
use cail_core::encoding::{EmbeddingTable, MessagePassing};
use cail_core::kuramoto::{Sequence, Split};
use cail_core::model::{CailModel, ModelConfig};
use cail_core::policy::{discriminator_objective, gaussian_nll, imitation_loss, BranchNet};
use cail_core::templates::{acyclicity_reg, option_loss, select, sparsity_reg, TemplateEmbedder, TrajectoryEncoder};
use cail_core::training::{composite_loss, LossWeights, TrainState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;
const TOLERANCE: f64 = 1e-4;
pub const INSTANCES: u64 = 20;

fn rel_error(a: &[f64], n: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(n).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(n));
    if scale < 1e-8 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

/// Entries with magnitude in `[gap, 1]` and random sign, away from kinks at 0.
fn away_from_zero(rng: &mut ChaCha8Rng, rows: usize, cols: usize, gap: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        let m = rng.random_range(gap..1.0);
        if rng.random::<bool>() {
            m
        } else {
            -m
        }
    })
}

/// Reduces any output to a scalar through a fixed random weighting.
fn contract(tape: &mut Tape, out: Var, rng: &mut ChaCha8Rng) -> Var {
    let (r, c) = tape.shape(out);
    let w = tape.constant(uniform(rng, r, c, -1.0, 1.0));
    let prod = tape.mul(out, w).unwrap();
    tape.sum(prod)
}

/// Gradient check of `build` with respect to every input matrix.
fn check_inputs(label: &str, inputs: &[Matrix], build: &dyn Fn(&mut Tape, &[Var]) -> Var) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|m| tape.leaf(m.clone())).collect();
    let loss = build(&mut tape, &vars);
    tape.backward(loss).unwrap();
    let eval = |values: &[Matrix]| {
        let mut t = Tape::new();
        let vs: Vec<Var> = values.iter().map(|m| t.leaf(m.clone())).collect();
        let l = build(&mut t, &vs);
        t.value(l).item()
    };
    let mut worst: f64 = 0.0;
    for (k, input) in inputs.iter().enumerate() {
        let analytic = tape.grad(vars[k]).cloned().unwrap_or_else(|| Matrix::zeros(input.rows(), input.cols()));
        let mut numeric = vec![0.0; input.len()];
        for (e, slot) in numeric.iter_mut().enumerate() {
            let mut plus = inputs.to_vec();
            plus[k].as_mut_slice()[e] += STEP;
            let mut minus = inputs.to_vec();
            minus[k].as_mut_slice()[e] -= STEP;
            *slot = (eval(&plus) - eval(&minus)) / (2.0 * STEP);
        }
        let err = rel_error(analytic.as_slice(), &numeric);
        assert!(err <= TOLERANCE, "{label}: operand {k} relative error {err:e}");
        worst = worst.max(err);
    }
    worst
}

/// Gradient check with respect to parameters of a store, optionally on a
/// sampled subset of entries per parameter.
fn check_params<S>(
    label: &str,
    state: &mut S,
    store: fn(&mut S) -> &mut ParamStore,
    ids: &[ParamId],
    per_param: Option<usize>,
    rng: &mut ChaCha8Rng,
    build: &dyn Fn(&S, &mut Tape, &mut Binding) -> Var,
) -> f64 {
    let mut tape = Tape::new();
    let mut bind = store(state).bind(&mut tape, ids, true);
    let loss = build(state, &mut tape, &mut bind);
    tape.backward(loss).unwrap();
    let grads = bind.grads(&tape);
    let eval = |s: &mut S| {
        let mut t = Tape::new();
        let mut b = store(s).bind(&mut t, ids, true);
        let l = build(s, &mut t, &mut b);
        t.value(l).item()
    };
    let mut worst: f64 = 0.0;
    for &id in ids {
        let len = store(state).get(id).len();
        let entries: Vec<usize> = match per_param {
            Some(k) if k < len => (0..k).map(|_| rng.random_range(0..len)).collect(),
            _ => (0..len).collect(),
        };
        let full = grads[id.index()].clone().unwrap_or_else(|| Matrix::zeros(1, len));
        let mut analytic = Vec::with_capacity(entries.len());
        let mut numeric = Vec::with_capacity(entries.len());
        for &e in &entries {
            let orig = store(state).get(id).as_slice()[e];
            store(state).get_mut(id).as_mut_slice()[e] = orig + STEP;
            let up = eval(state);
            store(state).get_mut(id).as_mut_slice()[e] = orig - STEP;
            let down = eval(state);
            store(state).get_mut(id).as_mut_slice()[e] = orig;
            analytic.push(full.as_slice()[e]);
            numeric.push((up - down) / (2.0 * STEP));
        }
        let err = rel_error(&analytic, &numeric);
        let name = store(state).name(id).to_string();
        assert!(err <= TOLERANCE, "{label}: parameter {name} relative error {err:e}");
        worst = worst.max(err);
    }
    worst
}

fn store_of(s: &mut ParamStore) -> &mut ParamStore {
    s
}

fn model_store(m: &mut CailModel) -> &mut ParamStore {
    &mut m.store
}

/// Runs `case` on `INSTANCES` seeded instances.
fn each_instance(tag: u64, mut case: impl FnMut(&mut ChaCha8Rng)) {
    for i in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(tag * 1000 + i);
        case(&mut rng);
    }
}

fn small_shape(rng: &mut ChaCha8Rng) -> (usize, usize) {
    (rng.random_range(1..5), rng.random_range(1..5))
}

fn unary(tag: u64, kind: OpKind, sample: fn(&mut ChaCha8Rng, usize, usize) -> Matrix) {
    each_instance(tag, |rng| {
        let (r, c) = small_shape(rng);
        let x = sample(rng, r, c);
        let weights_seed = rng.random::<u64>();
        check_inputs(kind.name(), &[x], &|tape, v| {
            let out = tape.apply(kind.clone(), v).unwrap();
            contract(tape, out, &mut ChaCha8Rng::seed_from_u64(weights_seed))
        });
    });
}

fn any_value(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    uniform(rng, r, c, -2.0, 2.0)
}

pub fn elementwise_unary_ops() {
    unary(1, OpKind::Sin, any_value);
    unary(2, OpKind::Exp, any_value);
    unary(3, OpKind::Log, |rng, r, c| uniform(rng, r, c, 0.3, 3.0));
    unary(4, OpKind::Relu, |rng, r, c| away_from_zero(rng, r, c, 0.05));
    unary(5, OpKind::Sigmoid, any_value);
    unary(6, OpKind::LogSigmoid, |rng, r, c| uniform(rng, r, c, -8.0, 8.0));
    unary(7, OpKind::Tanh, any_value);
    unary(8, OpKind::Square, any_value);
    unary(9, OpKind::Scale(-1.7), any_value);
    unary(10, OpKind::Transpose, any_value);
    unary(11, OpKind::ClampMin(0.1), |rng, r, c| {
        Matrix::from_fn(r, c, |_, _| if rng.random::<bool>() { rng.random_range(0.15..1.0) } else { rng.random_range(-1.0..0.05) })
    });
}

pub fn reductions() {
    unary(20, OpKind::Sum, any_value);
    unary(21, OpKind::Mean, any_value);
    unary(22, OpKind::L1Norm, |rng, r, c| away_from_zero(rng, r, c, 0.05));
    each_instance(23, |rng| {
        let n = rng.random_range(1..6);
        let x = any_value(rng, n, n);
        check_inputs("trace", &[x], &|tape, v| tape.trace(v[0]).unwrap());
    });
}

pub fn binary_ops_with_broadcast() {
    for (tag, kind) in [(30, OpKind::Add), (31, OpKind::Subtract), (32, OpKind::Multiply)] {
        each_instance(tag, |rng| {
            let (r, c) = small_shape(rng);
            let a = any_value(rng, r, c);
            let broadcast = kind != OpKind::Multiply && rng.random::<bool>();
            let b = if broadcast { any_value(rng, 1, c) } else { any_value(rng, r, c) };
            let seed = rng.random::<u64>();
            check_inputs(kind.name(), &[a, b], &|tape, v| {
                let out = tape.apply(kind.clone(), v).unwrap();
                contract(tape, out, &mut ChaCha8Rng::seed_from_u64(seed))
            });
        });
    }
    each_instance(33, |rng| {
        let (r, k) = small_shape(rng);
        let c = rng.random_range(1..5);
        let a = any_value(rng, r, k);
        let b = any_value(rng, k, c);
        let seed = rng.random::<u64>();
        check_inputs("matmul", &[a, b], &|tape, v| {
            let out = tape.matmul(v[0], v[1]).unwrap();
            contract(tape, out, &mut ChaCha8Rng::seed_from_u64(seed))
        });
    });
}

pub fn softmax_rows_at_several_temperatures() {
    each_instance(40, |rng| {
        let (r, c) = small_shape(rng);
        let x = any_value(rng, r, c + 1);
        let temperature = rng.random_range(0.2..1.5);
        let seed = rng.random::<u64>();
        check_inputs("softmax_rows", &[x], &|tape, v| {
            let out = tape.softmax_rows(v[0], temperature).unwrap();
            contract(tape, out, &mut ChaCha8Rng::seed_from_u64(seed))
        });
    });
}

pub fn structural_ops() {
    each_instance(50, |rng| {
        let r = rng.random_range(1..5);
        let (ca, cb) = (rng.random_range(1..4), rng.random_range(1..4));
        let a = any_value(rng, r, ca);
        let b = any_value(rng, r, cb);
        let seed = rng.random::<u64>();
        check_inputs("concat_cols", &[a, b], &|tape, v| {
            let out = tape.concat_cols(v[0], v[1]).unwrap();
            contract(tape, out, &mut ChaCha8Rng::seed_from_u64(seed))
        });
    });
    each_instance(51, |rng| {
        let c = rng.random_range(1..4);
        let count = rng.random_range(1..4);
        let parts: Vec<Matrix> = (0..count)
            .map(|_| {
                let r = rng.random_range(1..4);
                any_value(rng, r, c)
            })
            .collect();
        let seed = rng.random::<u64>();
        check_inputs("concat_rows", &parts, &|tape, v| {
            let out = tape.concat_rows(v).unwrap();
            contract(tape, out, &mut ChaCha8Rng::seed_from_u64(seed))
        });
    });
    each_instance(52, |rng| {
        let (r, c) = small_shape(rng);
        let x = any_value(rng, r + 1, c + 1);
        let (r0, c0) = (rng.random_range(0..=1), rng.random_range(0..=1));
        let seed = rng.random::<u64>();
        check_inputs("slice", &[x], &|tape, v| {
            let out = tape.slice(v[0], r0, r, c0, c).unwrap();
            contract(tape, out, &mut ChaCha8Rng::seed_from_u64(seed))
        });
    });
    each_instance(53, |rng| {
        let (r, c) = small_shape(rng);
        let x = any_value(rng, r, c);
        let rows: Vec<usize> = (0..rng.random_range(1..7)).map(|_| rng.random_range(0..r)).collect();
        let seed = rng.random::<u64>();
        check_inputs("gather_rows", &[x], &|tape, v| {
            let out = tape.gather_rows(v[0], rows.clone()).unwrap();
            contract(tape, out, &mut ChaCha8Rng::seed_from_u64(seed))
        });
    });
    each_instance(54, |rng| {
        let (r, c) = small_shape(rng);
        let x = any_value(rng, r, c * 2);
        let seed = rng.random::<u64>();
        check_inputs("reshape", &[x], &|tape, v| {
            let out = tape.reshape(v[0], r * 2, c).unwrap();
            contract(tape, out, &mut ChaCha8Rng::seed_from_u64(seed))
        });
    });
}

pub fn causal_convolution() {
    each_instance(60, |rng| {
        let steps = rng.random_range(1..8);
        let (c_in, c_out) = small_shape(rng);
        let kernel = rng.random_range(1..5);
        let x = any_value(rng, steps, c_in);
        let w = any_value(rng, kernel * c_in, c_out);
        let seed = rng.random::<u64>();
        check_inputs("causal_conv1d", &[x, w], &|tape, v| {
            let out = tape.causal_conv1d(v[0], v[1], kernel).unwrap();
            contract(tape, out, &mut ChaCha8Rng::seed_from_u64(seed))
        });
    });
}

pub fn trace_of_exponential() {
    each_instance(70, |rng| {
        let d = rng.random_range(2..7);
        let g = uniform(rng, d, d, -0.9, 0.9);
        check_inputs("trace_expm_hadamard", &[g], &|tape, v| tape.trace_expm_hadamard(v[0]).unwrap());
    });
}

pub fn fused_graph_ops() {
    each_instance(80, |rng| {
        let steps = rng.random_range(1..4);
        let n = rng.random_range(2..5);
        let d = rng.random_range(1..4);
        let g = any_value(rng, steps, n * n);
        let h = any_value(rng, steps * n, d);
        let seed = rng.random::<u64>();
        check_inputs("edge_aggregate", &[g, h], &|tape, v| {
            let out = tape.edge_aggregate(v[0], v[1]).unwrap();
            contract(tape, out, &mut ChaCha8Rng::seed_from_u64(seed))
        });
    });
    each_instance(81, |rng| {
        let steps = rng.random_range(1..4);
        let n = rng.random_range(1..4);
        let w = rng.random_range(1..4);
        let d = rng.random_range(1..4);
        let x = any_value(rng, steps, n * w);
        let e = any_value(rng, n * w, d);
        let b = any_value(rng, n, d);
        let seed = rng.random::<u64>();
        check_inputs("node_embed", &[x, e, b], &|tape, v| {
            let out = tape.node_embed(v[0], v[1], v[2]).unwrap();
            contract(tape, out, &mut ChaCha8Rng::seed_from_u64(seed))
        });
    });
}

pub fn acyclicity_and_sparsity_regularisers() {
    each_instance(90, |rng| {
        let m = rng.random_range(1..4);
        let bank = Matrix::from_fn(m, 25, |_, e| if e / 5 == e % 5 { 0.0 } else { rng.random_range(-0.6..0.6) });
        check_inputs("acyclicity_reg", &[bank], &|tape, v| acyclicity_reg(tape, v[0], 5).unwrap());
    });
    each_instance(91, |rng| {
        let m = rng.random_range(1..4);
        let bank = away_from_zero(rng, m, 16, 0.05);
        check_inputs("sparsity_reg", &[bank], &|tape, v| sparsity_reg(tape, v[0]));
    });
}

pub fn selection_and_option_loss() {
    each_instance(100, |rng| {
        let steps = rng.random_range(1..6);
        let m = rng.random_range(1..4);
        let dz = rng.random_range(1..4);
        let z = any_value(rng, steps, dz);
        let keys = any_value(rng, m, dz);
        let bank = any_value(rng, m, 9);
        let temperature = rng.random_range(0.5..2.0);
        let labels: Vec<usize> = (0..steps).map(|_| rng.random_range(0..m)).collect();
        let seed = rng.random::<u64>();
        check_inputs("select + option_loss", &[z, keys, bank], &|tape, v| {
            let (alpha, graphs) = select(tape, v[0], v[1], v[2], temperature).unwrap();
            let opt = option_loss(tape, alpha, &labels).unwrap();
            let g = contract(tape, graphs, &mut ChaCha8Rng::seed_from_u64(seed));
            tape.add(opt, g).unwrap()
        });
    });
}

pub fn trajectory_encoder_and_embedder() {
    each_instance(110, |rng| {
        let mut store = ParamStore::new();
        let enc = TrajectoryEncoder::new(&mut store, 3, 4, 2, 3, rng);
        let emb = TemplateEmbedder::new(&mut store, 3, 5, 4, rng);
        // nudge biases off zero so ReLU inputs avoid exact kinks
        for id in enc.ids().into_iter().chain(emb.mlp.ids()) {
            let m = store.get_mut(id);
            for x in m.as_mut_slice() {
                *x += rng.random_range(-0.1..0.1);
            }
        }
        let states = any_value(rng, 6, 3);
        let bank = any_value(rng, 2, 9);
        let ids: Vec<ParamId> = enc.ids().into_iter().chain(emb.mlp.ids()).collect();
        let seed = rng.random::<u64>();
        check_params("encoder + embedder", &mut store, store_of, &ids, None, rng, &|_, tape, bind| {
            let s = tape.constant(states.clone());
            let z = enc.encode_history(tape, bind, s).unwrap();
            let b = tape.constant(bank.clone());
            let keys = emb.forward(tape, bind, b).unwrap();
            let (_, g) = select(tape, z, keys, b, 0.7).unwrap();
            let mut w = ChaCha8Rng::seed_from_u64(seed);
            let a = contract(tape, z, &mut w);
            let c = contract(tape, g, &mut w);
            tape.add(a, c).unwrap()
        });
    });
}

pub fn embeddings_and_message_passing() {
    each_instance(120, |rng| {
        let (ns, na, w, d, steps) = (3, 2, 2, 3, 3);
        let n = ns + na;
        let mut store = ParamStore::new();
        let table = EmbeddingTable::new(&mut store, ns, na, w, d, rng);
        let gnn = MessagePassing::new(&mut store, n, d, 2, rng);
        for id in table.ids() {
            let m = store.get_mut(id);
            for x in m.as_mut_slice() {
                *x += rng.random_range(-0.5..0.5);
            }
        }
        let states = any_value(rng, steps, ns);
        let prev = any_value(rng, steps, na);
        let graphs = any_value(rng, steps, n * n);
        let ids: Vec<ParamId> = table.ids().into_iter().chain(gnn.ids()).collect();
        let seed = rng.random::<u64>();
        check_params("init_embeddings + message_pass", &mut store, store_of, &ids, None, rng, &|_, tape, bind| {
            let h0 = table.init_embeddings(tape, bind, &states, &prev).unwrap();
            let g = tape.constant(graphs.clone());
            let h = gnn.message_pass(tape, bind, h0, g).unwrap();
            contract(tape, h, &mut ChaCha8Rng::seed_from_u64(seed))
        });
        // and with respect to the graph itself
        let mut tape = Tape::new();
        let bind = store.bind(&mut tape, &ids, false);
        let h0 = table.init_embeddings(&mut tape, &bind, &states, &prev).unwrap();
        let h0 = tape.value(h0).clone();
        check_inputs("message_pass wrt graph", &[graphs.clone(), h0], &|tape, v| {
            let bind = store.bind(tape, &ids, false);
            let h = gnn.message_pass(tape, &bind, v[1], v[0]).unwrap();
            contract(tape, h, &mut ChaCha8Rng::seed_from_u64(seed))
        });
    });
}

pub fn prediction_losses() {
    each_instance(130, |rng| {
        let steps = rng.random_range(1..6);
        let k = rng.random_range(1..3);
        let expert = any_value(rng, steps, k);
        let sigma = rng.random_range(0.1..1.0);
        let entropy = rng.random_range(0.0..1.0);
        check_inputs("imitation_loss", &[any_value(rng, steps, 1), any_value(rng, steps, k)], &|tape, v| {
            imitation_loss(tape, v[0], v[1], &expert, sigma, entropy).unwrap().total
        });
        check_inputs("gaussian_nll", &[any_value(rng, steps, k)], &|tape, v| {
            gaussian_nll(tape, v[0], &expert, sigma).unwrap()
        });
        check_inputs("discriminator_objective", &[any_value(rng, steps, 1), any_value(rng, steps, 1)], &|tape, v| {
            discriminator_objective(tape, v[0], v[1]).unwrap()
        });
    });
    each_instance(131, |rng| {
        let mut store = ParamStore::new();
        let net = BranchNet::new(&mut store, "branch", 3, 5, 2, 0.1, rng);
        for id in net.ids() {
            for x in store.get_mut(id).as_mut_slice() {
                *x += rng.random_range(-0.1..0.1);
            }
        }
        let inputs = [any_value(rng, 4, 3), any_value(rng, 4, 3)];
        let target = any_value(rng, 4, 2);
        let ids = net.ids();
        check_params("branch net + nll", &mut store, store_of, &ids, None, rng, &|_, tape, bind| {
            let vars: Vec<Var> = inputs.iter().map(|m| tape.constant(m.clone())).collect();
            let out = net.forward(tape, bind, &vars).unwrap();
            gaussian_nll(tape, out, &target, 0.3).unwrap()
        });
    });
}

fn toy_sequence(rng: &mut ChaCha8Rng, steps: usize, ns: usize, na: usize) -> Sequence {
    Sequence {
        states: uniform(rng, steps, ns, -1.0, 1.0),
        actions: uniform(rng, steps, na, -1.0, 1.0),
        regimes: vec![0; steps],
        split: Split::Train,
    }
}

pub fn composite_objective_of_a_five_node_model() {
    each_instance(140, |rng| {
        let config = ModelConfig {
            n_state: 4,
            n_action: 1,
            templates: 2,
            history: 2,
            embed_dim: 4,
            encoder_hidden: 4,
            embedder_hidden: 6,
            head_hidden: 6,
            disc_hidden: 6,
            template_init: 0.5,
            temperature: 0.5,
            ..ModelConfig::default()
        };
        let mut model = CailModel::new(config, rng.random()).unwrap();
        let ids: Vec<ParamId> = model.store.ids().collect();
        for id in ids {
            if model.store.name(id) != "templates" {
                for x in model.store.get_mut(id).as_mut_slice() {
                    *x += rng.random_range(-0.1..0.1);
                }
            }
        }
        let seq = toy_sequence(rng, 6, 4, 1);
        let labels: Vec<usize> = (0..6).map(|_| rng.random_range(0..2)).collect();
        let noise = uniform(rng, 6, 1, -1.0, 1.0);
        let weights = LossWeights { sparsity: 0.3, regression: 0.7, option: 0.5, entropy: 0.2 };
        let state = TrainState { lambda2: 0.4, c: 2.0, h_old: None, epoch: 0, seed: 0 };
        let gen = model.generator_ids();
        check_params("composite_loss", &mut model, model_store, &gen, Some(6), rng, &|m, tape, bind| {
            let f = m.forward(tape, bind, &seq.states, &seq.previous_actions()).unwrap();
            bind.extend(&m.store, tape, &m.discriminator_ids(), false);
            composite_loss(tape, bind, m, &f, &seq, &labels, &noise, &weights, &state).unwrap().total
        });
    });
}

pub fn composite_objective_template_entries_in_full() {
    each_instance(150, |rng| {
        let config = ModelConfig {
            templates: 1,
            history: 1,
            embed_dim: 4,
            encoder_hidden: 4,
            embedder_hidden: 6,
            head_hidden: 6,
            disc_hidden: 6,
            template_init: 0.5,
            ..ModelConfig::default()
        };
        let mut model = CailModel::new(config, rng.random()).unwrap();
        let seq = toy_sequence(rng, 5, 4, 1);
        let noise = uniform(rng, 5, 1, -1.0, 1.0);
        let state = TrainState { lambda2: 1.0, c: 10.0, h_old: None, epoch: 0, seed: 0 };
        let weights = LossWeights { sparsity: 0.0, ..LossWeights::default() };
        let bank = model.causal.as_ref().unwrap().bank.bank;
        let gen = model.generator_ids();
        let rest: Vec<ParamId> = gen.iter().copied().filter(|&id| id != bank).collect();
        check_params("composite_loss wrt templates", &mut model, model_store, &[bank], None, rng, &|m, tape, bind| {
            bind.extend(&m.store, tape, &rest, false);
            let f = m.forward(tape, bind, &seq.states, &seq.previous_actions()).unwrap();
            bind.extend(&m.store, tape, &m.discriminator_ids(), false);
            composite_loss(tape, bind, m, &f, &seq, &[0; 5], &noise, &weights, &state).unwrap().total
        });
    });
}

/// Every case, in the order they run.
#[allow(dead_code)]
pub const CASES: &[(&str, fn())] = &[
    ("elementwise_unary_ops", elementwise_unary_ops),
    ("reductions", reductions),
    ("binary_ops_with_broadcast", binary_ops_with_broadcast),
    ("softmax_rows_at_several_temperatures", softmax_rows_at_several_temperatures),
    ("structural_ops", structural_ops),
    ("causal_convolution", causal_convolution),
    ("trace_of_exponential", trace_of_exponential),
    ("fused_graph_ops", fused_graph_ops),
    ("acyclicity_and_sparsity_regularisers", acyclicity_and_sparsity_regularisers),
    ("selection_and_option_loss", selection_and_option_loss),
    ("trajectory_encoder_and_embedder", trajectory_encoder_and_embedder),
    ("embeddings_and_message_passing", embeddings_and_message_passing),
    ("prediction_losses", prediction_losses),
    ("composite_objective_of_a_five_node_model", composite_objective_of_a_five_node_model),
    ("composite_objective_template_entries_in_full", composite_objective_template_entries_in_full),
];
