//! Closed-loop neural network control systems and their unrolling into a GNODE.
//!
//! Each control period reads the plant state through an affine selector, runs
//! the controller, writes the controller outputs into designated plant state
//! slots (inputs held constant over the period, with zero derivative in the
//! plant dynamics) and integrates the plant for one period.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::activation::{Activation, LayerActivation};
use crate::error::{Error, Result};
use crate::geometry::{IntervalBox, StarSet};
use crate::gnode::{GnodeModel, Layer, ReachOptions};
use crate::layers::FcLayer;
use crate::linalg::Matrix;
use crate::node::{NodeLayer, OutputMode};

#[derive(Clone, Debug, PartialEq)]
pub struct NncsSpec {
    controller: GnodeModel,
    plant: NodeLayer,
    control_steps: usize,
    selector: Matrix,
    selector_offset: Vec<f64>,
    targets: Vec<usize>,
}

impl NncsSpec {
    /// `controller` sees `selector · z + selector_offset`; its output `j` is
    /// written to plant state `targets[j]` before each period.
    pub fn new(
        controller: GnodeModel,
        plant: NodeLayer,
        control_steps: usize,
        selector: Matrix,
        selector_offset: Vec<f64>,
        targets: Vec<usize>,
    ) -> Result<Self> {
        if control_steps == 0 {
            return Err(Error::InvalidArgument("at least one control step is needed".into()));
        }
        if controller.num_node_layers() != 0 {
            return Err(Error::Unsupported(
                "controllers must consist of fully-connected layers".into(),
            ));
        }
        let n = plant.dim();
        if selector.cols() != n || selector.rows() != controller.input_dim() || selector_offset.len() != selector.rows()
        {
            return Err(Error::shape(format!(
                "selector is {}x{} with offset of length {}; plant has {} states, controller {} inputs",
                selector.rows(),
                selector.cols(),
                selector_offset.len(),
                n,
                controller.input_dim()
            )));
        }
        if targets.len() != controller.output_dim() {
            return Err(Error::shape(format!(
                "{} control targets for {} controller outputs",
                targets.len(),
                controller.output_dim()
            )));
        }
        for (k, t) in targets.iter().enumerate() {
            if *t >= n || targets[..k].contains(t) {
                return Err(Error::InvalidArgument(format!(
                    "control target {t} is out of range or repeated"
                )));
            }
        }
        let plant = plant
            .clone()
            .with_time(plant.time().with_output_mode(OutputMode::FinalSet));
        Ok(NncsSpec {
            controller,
            plant,
            control_steps,
            selector,
            selector_offset,
            targets,
        })
    }

    pub fn controller(&self) -> &GnodeModel {
        &self.controller
    }

    pub fn plant(&self) -> &NodeLayer {
        &self.plant
    }

    pub fn control_steps(&self) -> usize {
        self.control_steps
    }

    pub fn state_dim(&self) -> usize {
        self.plant.dim()
    }

    /// Number of model layers per control period.
    pub fn layers_per_period(&self) -> usize {
        self.controller.layers().len() + 3
    }

    /// The unrolled GNODE: per period, a selector layer that stacks the
    /// controller input on top of the state, the controller layers widened
    /// with linear pass-through channels, a routing layer that writes the
    /// controller output into the target slots, and the plant NODE.
    pub fn unroll(&self) -> Result<GnodeModel> {
        let n = self.state_dim();
        let k = self.selector.rows();
        let mut period = Vec::with_capacity(self.layers_per_period());

        let sel = self.selector.vstack(&Matrix::identity(n))?;
        let mut sel_b = self.selector_offset.clone();
        sel_b.extend(std::iter::repeat_n(0.0, n));
        period.push(Layer::Fc(FcLayer::new(sel, sel_b, Activation::Linear)?));
        let mut width = k;
        for l in self.controller.layers() {
            let Layer::Fc(f) = l else {
                unreachable!("checked in new")
            };
            let out = f.output_dim();
            let mut w = Matrix::zeros(out + n, width + n);
            for i in 0..out {
                w.row_mut(i)[..width].copy_from_slice(f.weights().row(i));
            }
            for i in 0..n {
                w[(out + i, width + i)] = 1.0;
            }
            let mut b = f.bias().to_vec();
            b.extend(std::iter::repeat_n(0.0, n));
            let mut acts: Vec<Activation> = f.activation().all(out).collect();
            acts.extend(std::iter::repeat_n(Activation::Linear, n));
            period.push(Layer::Fc(FcLayer::new(w, b, LayerActivation::PerNeuron(acts))?));
            width = out;
        }
        let mut route = Matrix::zeros(n, width + n);
        for i in 0..n {
            route[(i, width + i)] = 1.0;
        }
        for (j, t) in self.targets.iter().enumerate() {
            route[(*t, width + *t)] = 0.0;
            route[(*t, j)] = 1.0;
        }
        period.push(Layer::Fc(FcLayer::new(route, vec![0.0; n], Activation::Linear)?));
        period.push(Layer::Node(self.plant.clone()));

        let mut layers = Vec::with_capacity(period.len() * self.control_steps);
        for _ in 0..self.control_steps {
            layers.extend(period.iter().cloned());
        }
        GnodeModel::new(layers)
    }

    /// Indices of the unrolled model's plant layers, one per period.
    pub fn plant_layer_indices(&self) -> Vec<usize> {
        let p = self.layers_per_period();
        (0..self.control_steps).map(|k| (k + 1) * p - 1).collect()
    }

    /// Classical closed-loop reachability: per period the controller output
    /// is reduced to its interval hull and fed to the plant as a box input.
    ///
    /// Returns the plant sets at the end of every period. Sound, but it drops
    /// the correlation between state and control that the unrolled model keeps.
    pub fn closed_loop_reach(&self, r0: &StarSet, opts: &ReachOptions) -> Result<Vec<Vec<StarSet>>> {
        let n = self.state_dim();
        if r0.dim() != n {
            return Err(Error::shape("initial set dimension differs from the plant"));
        }
        let keep = {
            let mut m = Matrix::identity(n);
            for t in &self.targets {
                m[(*t, *t)] = 0.0;
            }
            m
        };
        let mut sets = vec![r0.clone()];
        let mut out = Vec::with_capacity(self.control_steps);
        for period in 0..self.control_steps {
            let mut next = Vec::new();
            for s in &sets {
                let ctrl_in = s.affine_map(&self.selector, &self.selector_offset)?;
                let r = self.controller.reach(&ctrl_in, opts).map_err(|e| e.at_layer(period))?;
                let mut u: Option<IntervalBox> = None;
                for t in r.final_sets() {
                    let b = t.set.box_bounds()?;
                    u = Some(match u {
                        None => b,
                        Some(a) => a.hull(&b)?,
                    });
                }
                let Some(u) = u else { continue };
                let mut z = s.affine_map(&keep, &vec![0.0; n])?;
                for (j, t) in self.targets.iter().enumerate() {
                    let (lo, hi) = (u.lower()[j], u.upper()[j]);
                    let var = z.push_variable(lo, hi);
                    z.bind_dimension(*t, var);
                }
                let fp = self.plant.reach(&z)?;
                next.extend(fp.steps.iter().map(|st| st.set.to_star()));
            }
            out.push(next.clone());
            sets = next;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnode::{SoundnessChecker, TaggedPoint};
    use crate::node::{NodeDynamics, TimeConfig};

    /// Plant state `(x, u)` with `ẋ = a x + u`, `u̇ = 0`.
    fn scalar_plant(a: f64, period: f64) -> NodeLayer {
        let w = Matrix::from_rows(&[vec![a, 1.0], vec![0.0, 0.0]]).unwrap();
        let d = NodeDynamics::new(vec![FcLayer::new(w, vec![0.0, 0.0], Activation::Linear).unwrap()]).unwrap();
        NodeLayer::new(
            d,
            TimeConfig::new(period, period / 100.0, OutputMode::FinalSet).unwrap(),
        )
    }

    fn gain_controller(k: f64) -> GnodeModel {
        GnodeModel::new(vec![Layer::Fc(
            FcLayer::new(Matrix::from_rows(&[vec![k]]).unwrap(), vec![0.0], Activation::Linear).unwrap(),
        )])
        .unwrap()
    }

    fn spec(a: f64, k: f64, cp: usize) -> NncsSpec {
        NncsSpec::new(
            gain_controller(k),
            scalar_plant(a, 1.0),
            cp,
            Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap(),
            vec![0.0],
            vec![1],
        )
        .unwrap()
    }

    #[test]
    fn zero_control_matches_plant_only() {
        let s = spec(-1.0, 0.0, 1);
        let m = s.unroll().unwrap();
        let r0 = StarSet::from_box(&IntervalBox::new(vec![0.5, 0.0], vec![1.0, 0.0]).unwrap());
        let r = m.reach(&r0, &ReachOptions::default()).unwrap();
        let plant_only = s.plant().reach(&r0).unwrap();
        let a = r.final_box().unwrap();
        let b = plant_only.steps[0].set.to_star().box_bounds().unwrap();
        for i in 0..2 {
            assert!((a.lower()[i] - b.lower()[i]).abs() < 1e-12);
            assert!((a.upper()[i] - b.upper()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn integrator_with_deadbeat_gain() {
        // ż = u held over a unit period with u = −x drives x to 0 each period
        let s = spec(0.0, -1.0, 2);
        let m = s.unroll().unwrap();
        let sim = m.simulate(&[1.0, 0.0]).unwrap();
        assert!(sim.output[0].abs() < 1e-9);
        let r = m
            .reach(&StarSet::point(vec![1.0, 0.0]), &ReachOptions::default())
            .unwrap();
        let b = r.final_box().unwrap();
        assert!(b.lower()[0] <= 1e-9 && b.upper()[0] >= -1e-9);
    }

    #[test]
    fn half_gain_quarters_state() {
        let s = spec(0.0, -0.5, 2);
        let m = s.unroll().unwrap();
        let sim = m.simulate(&[1.0, 0.0]).unwrap();
        assert!((sim.output[0] - 0.25).abs() < 1e-9);
        let r = m
            .reach(&StarSet::point(vec![1.0, 0.0]), &ReachOptions::default())
            .unwrap();
        assert!(r.final_sets().iter().any(|t| t.set.contains(&[0.25, -0.25]).unwrap()));
    }

    #[test]
    fn closed_loop_and_unrolled_contain_simulations() {
        let s = spec(-0.5, -0.8, 3);
        let m = s.unroll().unwrap();
        let r0 = StarSet::from_box(&IntervalBox::new(vec![0.8, 0.0], vec![1.2, 0.0]).unwrap());
        let r = m.reach(&r0, &ReachOptions::default()).unwrap();
        let cl = s.closed_loop_reach(&r0, &ReachOptions::default()).unwrap();
        let chk = SoundnessChecker::new(&r).unwrap();
        let idx = s.plant_layer_indices();
        for x in [0.8, 1.0, 1.2] {
            assert!(chk.check(&m, &[x, 0.0]).unwrap().is_empty());
            let per_layer = m.simulate_layers(&[x, 0.0]).unwrap();
            for (p, li) in idx.iter().enumerate() {
                let pt: &TaggedPoint = &per_layer[*li][0];
                assert!(cl[p].iter().any(|st| st.contains(&pt.x).unwrap()));
            }
        }
    }

    #[test]
    fn wiring_is_validated() {
        let r = NncsSpec::new(
            gain_controller(1.0),
            scalar_plant(0.0, 1.0),
            1,
            Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap(),
            vec![0.0],
            vec![2],
        );
        assert!(r.is_err());
    }
}
