//! Seeded fixture models with the layer shapes of the published benchmark
//! architectures. Trained weights are not available, so every weight is drawn
//! from a seeded Glorot-uniform distribution scaled by 0.5 and every bias from
//! `U(-0.1, 0.1)`.

use std::fmt;
use std::str::FromStr;

use gnode_reach_core::gnode::describe;
use gnode_reach_core::nncs::NncsSpec;
use gnode_reach_core::{
    Activation, FcLayer, GnodeModel, HalfspaceSpec, IntervalBox, Layer, LayerActivation, Matrix, NodeDynamics,
    NodeLayer, OutputMode, TimeConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model_io::ModelDocument;

/// Pixel count of the image classifiers' input.
pub const IMAGE_PIXELS: usize = 784;
pub const NUM_CLASSES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Size3 {
    S,
    M,
    L,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RandomSize {
    Xs,
    S,
    M,
    L,
    Xl,
    Xxl,
}

impl RandomSize {
    pub const ALL: [RandomSize; 6] = [
        RandomSize::Xs,
        RandomSize::S,
        RandomSize::M,
        RandomSize::L,
        RandomSize::Xl,
        RandomSize::Xxl,
    ];

    pub fn label(self) -> &'static str {
        match self {
            RandomSize::Xs => "XS",
            RandomSize::S => "S",
            RandomSize::M => "M",
            RandomSize::L => "L",
            RandomSize::Xl => "XL",
            RandomSize::Xxl => "XXL",
        }
    }

    /// `(input, first NN width, NODE hidden width, NODE state, output)`.
    fn dims(self) -> (usize, usize, usize, usize, usize) {
        match self {
            RandomSize::Xs => (1, 2, 2, 2, 1),
            RandomSize::S => (2, 3, 5, 3, 2),
            RandomSize::M => (2, 4, 8, 4, 2),
            RandomSize::L => (3, 4, 8, 4, 3),
            RandomSize::Xl => (3, 5, 10, 5, 3),
            RandomSize::Xxl => (4, 5, 10, 5, 4),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Recipe {
    SpiralLinear,
    SpiralNonlinear,
    DampedOscillator(usize),
    Fpa,
    Cartpole,
    /// `true` for the nonlinear plant.
    Acc {
        nonlinear: bool,
    },
    Fnode(Size3),
    RandomGnode(RandomSize),
    /// A single linear identity layer of the given width.
    Identity(usize),
}

#[derive(Debug, thiserror::Error)]
#[error("unknown fixture `{0}`")]
pub struct UnknownRecipe(pub String);

impl FromStr for Recipe {
    type Err = UnknownRecipe;

    /// `spiral_linear`, `damped_oscillator(1)`, `acc_3rd_order(linear)`,
    /// `random_gnode(XS)`, `fnode_m`, `identity(2)`, …
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || UnknownRecipe(s.to_string());
        let s = s.trim();
        let (name, arg) = match s.find('(') {
            Some(i) => (&s[..i], Some(s[i + 1..].strip_suffix(')').ok_or_else(err)?.trim())),
            None => (s, None),
        };
        Ok(match (name.to_ascii_lowercase().as_str(), arg) {
            ("spiral_linear", None) => Recipe::SpiralLinear,
            ("spiral_nonlinear", None) => Recipe::SpiralNonlinear,
            ("damped_oscillator", Some(n)) => Recipe::DampedOscillator(n.parse().map_err(|_| err())?),
            ("fpa", None) => Recipe::Fpa,
            ("cartpole", None) => Recipe::Cartpole,
            ("acc_3rd_order", Some("linear")) => Recipe::Acc { nonlinear: false },
            ("acc_3rd_order", Some("nonlinear")) => Recipe::Acc { nonlinear: true },
            ("fnode_s", None) => Recipe::Fnode(Size3::S),
            ("fnode_m", None) => Recipe::Fnode(Size3::M),
            ("fnode_l", None) => Recipe::Fnode(Size3::L),
            ("random_gnode", Some(sz)) => Recipe::RandomGnode(
                *RandomSize::ALL
                    .iter()
                    .find(|r| r.label().eq_ignore_ascii_case(sz))
                    .ok_or_else(err)?,
            ),
            ("identity", Some(n)) => Recipe::Identity(n.parse().ok().filter(|n| *n > 0).ok_or_else(err)?),
            _ => return Err(err()),
        })
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Recipe::SpiralLinear => f.write_str("spiral_linear"),
            Recipe::SpiralNonlinear => f.write_str("spiral_nonlinear"),
            Recipe::DampedOscillator(n) => write!(f, "damped_oscillator({n})"),
            Recipe::Fpa => f.write_str("fpa"),
            Recipe::Cartpole => f.write_str("cartpole"),
            Recipe::Acc { nonlinear: false } => f.write_str("acc_3rd_order(linear)"),
            Recipe::Acc { nonlinear: true } => f.write_str("acc_3rd_order(nonlinear)"),
            Recipe::Fnode(Size3::S) => f.write_str("fnode_s"),
            Recipe::Fnode(Size3::M) => f.write_str("fnode_m"),
            Recipe::Fnode(Size3::L) => f.write_str("fnode_l"),
            Recipe::RandomGnode(s) => write!(f, "random_gnode({})", s.label()),
            Recipe::Identity(n) => write!(f, "identity({n})"),
        }
    }
}

impl Recipe {
    /// Every published architecture, in table order.
    pub fn catalogue() -> Vec<Recipe> {
        let mut v = vec![
            Recipe::SpiralLinear,
            Recipe::SpiralNonlinear,
            Recipe::DampedOscillator(0),
            Recipe::DampedOscillator(1),
            Recipe::DampedOscillator(2),
            Recipe::Fpa,
            Recipe::Cartpole,
            Recipe::Acc { nonlinear: false },
            Recipe::Acc { nonlinear: true },
            Recipe::Fnode(Size3::S),
            Recipe::Fnode(Size3::M),
            Recipe::Fnode(Size3::L),
        ];
        v.extend(RandomSize::ALL.iter().map(|s| Recipe::RandomGnode(*s)));
        v
    }

    /// The layer shapes the generated model must have, written the way the
    /// architecture tables write them. For the ACC plant this is the raw
    /// `g_acc` network.
    pub fn manifest(&self) -> String {
        match self {
            Recipe::SpiralLinear => "NODE[fc(10)-fc(2)]".into(),
            Recipe::SpiralNonlinear => "NODE[tanh(10)-fc(2)]".into(),
            Recipe::DampedOscillator(n) => {
                let w = 2 + n;
                format!("fc({w}) | NODE[fc(20)-fc(20)-fc({w})] | fc(2)")
            }
            Recipe::Fpa => "NODE[tanh(5)-fc(5)]".into(),
            Recipe::Cartpole => "NODE[tanh(8)-fc(4)]".into(),
            Recipe::Acc { nonlinear: true } => "NODE[tanh(10)-tanh(4)]".into(),
            Recipe::Acc { nonlinear: false } => "NODE[fc(20)-fc(4)]".into(),
            Recipe::Fnode(Size3::S) => "relu(64) | relu(10) | NODE[fc(10)] | fc(10)".into(),
            Recipe::Fnode(Size3::M) => "relu(64) | relu(32) | fc(16) | NODE[fc(10)-fc(16)] | fc(10)".into(),
            Recipe::Fnode(Size3::L) => {
                "relu(64) | relu(32) | relu(32) | relu(32) | fc(16) | NODE[fc(10)-fc(10)-fc(10)-fc(16)] | fc(10)".into()
            }
            Recipe::RandomGnode(s) => {
                let (_, a, h, n, o) = s.dims();
                format!("tanh({a}) | NODE[tanh({h})-tanh({n})] | tanh({n}) | NODE[tanh({n})] | tanh({o})")
            }
            Recipe::Identity(n) => format!("fc({n})"),
        }
    }
}

/// ACC loop parameters.
pub const ACC_PERIOD: f64 = 0.1;
pub const ACC_STEP: f64 = 0.01;
pub const ACC_CONTROL_STEPS: usize = 5;
pub const ACC_V_SET: f64 = 30.0;
pub const ACC_T_GAP: f64 = 1.4;
pub const ACC_D_DEFAULT: f64 = 10.0;

#[derive(Clone, Debug)]
pub struct Fixture {
    pub recipe: Recipe,
    pub seed: u64,
    pub model: GnodeModel,
    /// The benchmark's nominal input box.
    pub input: IntervalBox,
    /// ACC only: the closed loop the model was unrolled from.
    pub nncs: Option<NncsSpec>,
    /// ACC only: the learned part of the plant, `z_acc ↦ ẏ`.
    pub g_acc: Option<NodeDynamics>,
    /// ACC only: `D_rel ≤ D_safe`, i.e. `x1 − x4 − t_gap·x5 ≤ D_default`.
    pub unsafe_region: Option<HalfspaceSpec>,
}

impl Fixture {
    /// The network whose shape [`Recipe::manifest`] describes.
    pub fn shape(&self) -> String {
        match &self.g_acc {
            Some(g) => {
                let node = NodeLayer::new(g.clone(), TimeConfig::new(1.0, 1.0, OutputMode::FinalSet).unwrap());
                describe(&GnodeModel::new(vec![Layer::Node(node)]).unwrap())
            }
            None => describe(&self.model),
        }
    }

    pub fn document(&self) -> ModelDocument {
        ModelDocument::from_model(
            &self.model,
            &self.recipe.to_string(),
            Some(format!("fixture seed {}", self.seed)),
        )
    }
}

struct Gen(ChaCha8Rng);

impl Gen {
    fn new(seed: u64) -> Self {
        Gen(ChaCha8Rng::seed_from_u64(seed))
    }

    fn fc(&mut self, n_in: usize, n_out: usize, act: Activation) -> FcLayer {
        self.fc_scaled(n_in, n_out, act, 1.0)
    }

    fn fc_scaled(&mut self, n_in: usize, n_out: usize, act: Activation, scale: f64) -> FcLayer {
        let limit = 0.5 * (6.0 / (n_in + n_out) as f64).sqrt();
        let data: Vec<f64> = (0..n_in * n_out)
            .map(|_| scale * self.0.gen_range(-limit..=limit))
            .collect();
        let b: Vec<f64> = (0..n_out).map(|_| self.0.gen_range(-0.1..=0.1)).collect();
        FcLayer::new(Matrix::from_row_major(n_out, n_in, data).unwrap(), b, act).unwrap()
    }

    /// Stacked layers `n → widths[0] → …` with one activation per layer.
    fn stack(&mut self, n: usize, spec: &[(usize, Activation)]) -> Vec<FcLayer> {
        let mut w = n;
        spec.iter()
            .map(|(k, a)| {
                let l = self.fc(w, *k, *a);
                w = *k;
                l
            })
            .collect()
    }

    fn node(&mut self, n: usize, hidden: &[(usize, Activation)], out: Activation, t: TimeConfig) -> NodeLayer {
        let mut spec = hidden.to_vec();
        spec.push((n, out));
        NodeLayer::new(NodeDynamics::new(self.stack(n, &spec)).unwrap(), t)
    }
}

fn time(t_f: f64, step: f64, mode: OutputMode) -> TimeConfig {
    TimeConfig::new(t_f, step, mode).unwrap()
}

use Activation::{Linear, Relu, Tanh};

pub fn generate(recipe: Recipe, seed: u64) -> Fixture {
    let mut g = Gen::new(seed);
    let flow = |t_f, h| time(t_f, h, OutputMode::Flowpipe);
    let fin = |t_f, h| time(t_f, h, OutputMode::FinalSet);
    let mut nncs = None;
    let mut g_acc = None;
    let mut unsafe_region = None;
    let (layers, input): (Vec<Layer>, IntervalBox) = match recipe {
        Recipe::SpiralLinear | Recipe::SpiralNonlinear => {
            let act = if recipe == Recipe::SpiralLinear { Linear } else { Tanh };
            let n = g.node(2, &[(10, act)], Linear, flow(1.0, 0.01));
            (vec![n.into()], IntervalBox::around(&[2.0, 0.0], 0.01).unwrap())
        }
        Recipe::DampedOscillator(aug) => {
            let w = 2 + aug;
            let pre = g.fc(2, w, Linear);
            let n = g.node(w, &[(20, Linear), (20, Linear)], Linear, fin(1.0, 0.01));
            let post = g.fc(w, 2, Linear);
            (
                vec![pre.into(), n.into(), post.into()],
                IntervalBox::around(&[1.0, 0.5], 0.01).unwrap(),
            )
        }
        Recipe::Fpa => {
            let n = g.node(5, &[(5, Tanh)], Linear, flow(0.5, 0.01));
            (
                vec![n.into()],
                IntervalBox::around(&[0.5, 0.5, 0.5, 0.5, 0.5], 0.01).unwrap(),
            )
        }
        Recipe::Cartpole => {
            let n = g.node(4, &[(8, Tanh)], Linear, flow(0.1, 1e-4));
            (
                vec![n.into()],
                IntervalBox::around(&[0.0, 0.0, 0.001, 0.0], 0.001).unwrap(),
            )
        }
        Recipe::Acc { nonlinear } => {
            let (h, s1, s2) = if nonlinear {
                (10, Tanh, Tanh)
            } else {
                (20, Linear, Linear)
            };
            let raw = NodeDynamics::new(g.stack(4, &[(h, s1), (4, s2)])).unwrap();
            let plant = NodeLayer::new(acc_plant(&raw), fin(ACC_PERIOD, ACC_STEP));
            let controller = GnodeModel::new(
                g.stack(5, &[(20, Relu), (20, Relu), (20, Relu), (1, Linear)])
                    .into_iter()
                    .map(Layer::Fc)
                    .collect(),
            )
            .unwrap();
            let mut sel = Matrix::zeros(5, 8);
            sel[(2, 4)] = 1.0;
            sel[(3, 0)] = 1.0;
            sel[(3, 3)] = -1.0;
            sel[(4, 1)] = 1.0;
            sel[(4, 4)] = -1.0;
            let spec = NncsSpec::new(
                controller,
                plant,
                ACC_CONTROL_STEPS,
                sel,
                vec![ACC_V_SET, ACC_T_GAP, 0.0, 0.0, 0.0],
                vec![7],
            )
            .unwrap();
            let model = spec.unroll().unwrap();
            g_acc = Some(raw);
            nncs = Some(spec);
            unsafe_region =
                Some(HalfspaceSpec::new(vec![1.0, 0.0, 0.0, -1.0, -ACC_T_GAP, 0.0, 0.0, 0.0], ACC_D_DEFAULT).unwrap());
            (model.into_layers(), acc_initial_box())
        }
        Recipe::Fnode(size) => {
            let mut layers: Vec<Layer> = Vec::new();
            let first = g.fc(IMAGE_PIXELS, 64, Relu);
            let first = FcLayer::new(first.weights().scale(1.0 / 255.0), first.bias().to_vec(), Relu).unwrap();
            layers.push(first.into());
            let (pre, node_hidden, state): (Vec<(usize, Activation)>, Vec<(usize, Activation)>, usize) = match size {
                Size3::S => (vec![(10, Relu)], vec![], 10),
                Size3::M => (vec![(32, Relu), (16, Linear)], vec![(10, Linear)], 16),
                Size3::L => (
                    vec![(32, Relu), (32, Relu), (32, Relu), (16, Linear)],
                    vec![(10, Linear), (10, Linear), (10, Linear)],
                    16,
                ),
            };
            layers.extend(g.stack(64, &pre).into_iter().map(Layer::Fc));
            layers.push(g.node(state, &node_hidden, Linear, fin(1.0, 0.01)).into());
            layers.push(g.fc(state, NUM_CLASSES, Linear).into());
            let img = synthetic_images(seed, 1).remove(0).0;
            let input = IntervalBox::around(&img, 0.0).unwrap();
            (layers, input)
        }
        Recipe::RandomGnode(size) => {
            let (i, a, h, n, o) = size.dims();
            let l1 = g.fc(i, a, Tanh);
            let n1 = g.node(n, &[(h, Tanh)], Tanh, fin(1.0, 0.01));
            let l2 = g.fc(n, n, Tanh);
            let n2 = g.node(n, &[], Tanh, fin(1.0, 0.01));
            let l3 = g.fc(n, o, Tanh);
            debug_assert_eq!(a, n);
            (
                vec![l1.into(), n1.into(), l2.into(), n2.into(), l3.into()],
                IntervalBox::around(&vec![0.0; i], 0.01).unwrap(),
            )
        }
        Recipe::Identity(n) => (
            vec![FcLayer::new(Matrix::identity(n), vec![0.0; n], Linear).unwrap().into()],
            IntervalBox::around(&vec![0.0; n], 0.0).unwrap(),
        ),
    };
    Fixture {
        recipe,
        seed,
        model: GnodeModel::new(layers).unwrap(),
        input,
        nncs,
        g_acc,
        unsafe_region,
    }
}

/// `[x_lead, v_lead, γ_lead, x_ego, v_ego, γ_ego, a_lead, a_ego]`.
pub fn acc_initial_box() -> IntervalBox {
    IntervalBox::new(
        vec![90.0, 32.0, 0.0, 10.0, 30.0, 0.0, -2.0, 0.0],
        vec![110.0, 32.2, 0.0, 11.0, 30.2, 0.0, -2.0, 0.0],
    )
    .unwrap()
}

/// Embeds `g: R⁴ → R⁴` into the 8-state plant
/// `ẋ = (x2, x3, g₀(z), x5, x6, g₁(z), 0, 0)` with `z = (x3, x6, a_lead, a_ego)`.
/// The accelerations are inputs held constant over a period.
pub fn acc_plant(g: &NodeDynamics) -> NodeDynamics {
    let [l1, l2] = g.layers() else {
        panic!("g_acc has two layers")
    };
    let h = l1.output_dim();
    let z = [2usize, 5, 6, 7];
    let pass = [1usize, 2, 4, 5];

    let mut w1 = Matrix::zeros(h + 4, 8);
    for i in 0..h {
        for (j, c) in z.iter().enumerate() {
            w1[(i, *c)] = l1.weights()[(i, j)];
        }
    }
    for (k, c) in pass.iter().enumerate() {
        w1[(h + k, *c)] = 1.0;
    }
    let mut b1 = l1.bias().to_vec();
    b1.extend([0.0; 4]);

    let mut w2 = Matrix::zeros(8, h + 4);
    for i in 0..4 {
        w2.row_mut(i)[..h].copy_from_slice(l2.weights().row(i));
        w2[(4 + i, h + i)] = 1.0;
    }
    let mut b2 = l2.bias().to_vec();
    b2.extend([0.0; 4]);

    let widen = |a: &LayerActivation, k: usize| -> LayerActivation {
        if a.is_linear() {
            LayerActivation::Uniform(Linear)
        } else {
            let mut v: Vec<Activation> = a.all(k).collect();
            v.extend([Linear; 4]);
            LayerActivation::PerNeuron(v)
        }
    };

    // rows of the layer-2 output: g0 g1 g2 g3 x2 x3 x5 x6
    let mut w3 = Matrix::zeros(8, 8);
    for (row, col) in [(0, 4), (1, 5), (2, 0), (3, 6), (4, 7), (5, 1)] {
        w3[(row, col)] = 1.0;
    }
    NodeDynamics::new(vec![
        FcLayer::new(w1, b1, widen(l1.activation(), h)).unwrap(),
        FcLayer::new(w2, b2, widen(l2.activation(), 4)).unwrap(),
        FcLayer::new(w3, vec![0.0; 8], Linear).unwrap(),
    ])
    .unwrap()
}

/// Seeded 28×28 images in `[0, 255]`: one blob prototype per class plus
/// uniform noise. Returns `(pixels, prototype class)`.
pub fn synthetic_images(seed: u64, count: usize) -> Vec<(Vec<f64>, usize)> {
    let mut proto_rng = ChaCha8Rng::seed_from_u64(0x5eed_1a6e);
    let prototypes: Vec<Vec<f64>> = (0..NUM_CLASSES)
        .map(|_| {
            let blobs: Vec<(f64, f64, f64)> = (0..4)
                .map(|_| {
                    (
                        proto_rng.gen_range(6.0..22.0),
                        proto_rng.gen_range(6.0..22.0),
                        proto_rng.gen_range(2.0..5.0),
                    )
                })
                .collect();
            (0..IMAGE_PIXELS)
                .map(|p| {
                    let (r, c) = ((p / 28) as f64, (p % 28) as f64);
                    let v: f64 = blobs
                        .iter()
                        .map(|(br, bc, s)| (-((r - br).powi(2) + (c - bc).powi(2)) / (2.0 * s * s)).exp())
                        .sum();
                    (255.0 * v).min(255.0)
                })
                .collect()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let class = k % NUM_CLASSES;
            let img = prototypes[class]
                .iter()
                .map(|v| (v + rng.gen_range(-30.0..30.0)).clamp(0.0, 255.0).round())
                .collect();
            (img, class)
        })
        .collect()
}
