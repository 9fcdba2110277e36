// SPDX-License-Identifier: Apache-2.0

//! Analytic latency and FLOPs accounting.
//!
//! Units: data volumes are counted in raw accelerometer samples, `b` in cycles
//! per sample, `theta` in cycles per second and `phi` in samples per second.
//! Latencies are computed in seconds and reported in milliseconds.

use serde::{Deserialize, Serialize};

use crate::cascade::CascadeReport;
use crate::error::{Error, Result};
use crate::nn::TieredModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeParams {
    /// Fraction of the incoming data processed locally.
    pub s: f64,
    /// Computation demand per data unit.
    pub b: f64,
    /// Computing capacity.
    pub theta: f64,
    /// Size of processed data relative to its input.
    pub rho: f64,
    /// Data generation rate; overwritten from cascade volumes by [`cascade_latency`].
    #[serde(default)]
    pub lambda_gen: f64,
    /// Processed data received from below; overwritten like `lambda_gen`.
    #[serde(default)]
    pub beta: f64,
    /// Uplink transmit capacity.
    pub phi: f64,
}

impl NodeParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.s, self.b, self.theta, self.rho, self.lambda_gen, self.beta, self.phi]
            .iter()
            .all(|v| v.is_finite());
        let ok = finite
            && self.theta > 0.0
            && self.phi > 0.0
            && (0.0..=1.0).contains(&self.s)
            && (0.0..=1.0).contains(&self.rho)
            && self.b >= 0.0
            && self.lambda_gen >= 0.0
            && self.beta >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::TopologyMismatch(format!("invalid node parameters {self:?}")))
        }
    }

    /// Computation plus transmission time of one node, in seconds.
    pub fn latency(&self) -> f64 {
        let compute = self.s * self.b / self.theta;
        let sent = self.rho * self.s * self.lambda_gen + (1.0 - self.s) * self.lambda_gen + self.beta;
        compute + sent / self.phi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub name: String,
    /// Node in the layer above; `None` only in the top layer.
    #[serde(default)]
    pub parent: Option<String>,
    #[serde(flatten)]
    pub params: NodeParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyLayer {
    pub name: String,
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub layers: Vec<TopologyLayer>,
}

impl Topology {
    /// Checks the node parameters and the tree shape.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::TopologyMismatch("topology has no layers".into()));
        }
        for (k, layer) in self.layers.iter().enumerate() {
            if layer.nodes.is_empty() {
                return Err(Error::TopologyMismatch(format!("layer {} has no nodes", layer.name)));
            }
            let above = self.layers.get(k + 1);
            for node in &layer.nodes {
                node.params.validate()?;
                match (above, &node.parent) {
                    (None, None) => {}
                    (None, Some(p)) => {
                        return Err(Error::TopologyMismatch(format!(
                            "top node {} cannot have parent {p}",
                            node.name
                        )))
                    }
                    (Some(up), Some(p)) if up.nodes.iter().any(|n| &n.name == p) => {}
                    (Some(up), p) => {
                        return Err(Error::TopologyMismatch(format!(
                            "node {} needs a parent in layer {}, got {p:?}",
                            node.name, up.name
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    pub fn layer(&self, name: &str) -> Option<&TopologyLayer> {
        self.layers.iter().find(|l| l.name == name)
    }

    /// One node per station; ED → MEC1 → MEC2 → CC.
    pub fn reference() -> Self {
        let node = |name: &str, parent: Option<&str>, s, b, theta, rho, phi| Node {
            name: name.into(),
            parent: parent.map(Into::into),
            params: NodeParams {
                s,
                b,
                theta,
                rho,
                lambda_gen: 0.0,
                beta: 0.0,
                phi,
            },
        };
        let layer = |name: &str, n: Node| TopologyLayer {
            name: name.into(),
            nodes: vec![n],
        };
        Topology {
            layers: vec![
                layer("ED", node("ed0", Some("mec1-0"), 1.0, 400.0, 2.0e8, 0.1, 5.0e5)),
                layer("MEC1", node("mec1-0", Some("mec2-0"), 0.5, 4.0e3, 1.0e10, 0.1, 2.0e6)),
                layer("MEC2", node("mec2-0", Some("cc0"), 0.5, 1.6e4, 4.0e10, 0.1, 2.0e6)),
                layer("CC", node("cc0", None, 1.0, 6.4e4, 2.0e11, 0.0, 1.0e7)),
            ],
        }
    }
}

/// Latency of layer `n` (1-based): the sum over its nodes, in seconds.
pub fn layer_latency(topology: &Topology, n: usize) -> Result<f64> {
    if n == 0 || n > topology.layers.len() {
        return Err(Error::InvalidLayer {
            layer: n,
            count: topology.layers.len(),
        });
    }
    Ok(topology.layers[n - 1].nodes.iter().map(|node| node.params.latency()).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerLatency {
    pub name: String,
    /// Samples processed at this layer over the horizon.
    pub volume: u64,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub horizon_s: f64,
    pub layers: Vec<LayerLatency>,
    pub total_ms: f64,
}

/// Evaluates every station's layer with volumes taken from `report`.
///
/// A layer's processed samples, spread evenly over its nodes, become each
/// node's generation rate (per `horizon_s`); above the gate the same volume also
/// arrives as `beta`.
pub fn cascade_latency(report: &CascadeReport, topology: &Topology, horizon_s: f64) -> Result<LatencyReport> {
    if !(horizon_s > 0.0 && horizon_s.is_finite()) {
        return Err(Error::TopologyMismatch(format!("horizon must be positive, got {horizon_s}")));
    }
    let mut layers = Vec::with_capacity(report.layers.len());
    for (k, stats) in report.layers.iter().enumerate() {
        let topo = topology.layer(&stats.name).ok_or_else(|| {
            Error::TopologyMismatch(format!("no topology layer named {}", stats.name))
        })?;
        let per_node = stats.processed_samples as f64 / topo.nodes.len() as f64;
        let seconds: f64 = topo
            .nodes
            .iter()
            .map(|node| {
                NodeParams {
                    lambda_gen: per_node / horizon_s,
                    beta: if k == 0 { 0.0 } else { per_node },
                    ..node.params
                }
                .latency()
            })
            .sum();
        layers.push(LayerLatency {
            name: stats.name.clone(),
            volume: stats.processed_samples,
            latency_ms: seconds * 1e3,
        });
    }
    let total_ms = layers.iter().map(|l| l.latency_ms).sum();
    Ok(LatencyReport {
        horizon_s,
        layers,
        total_ms,
    })
}

/// `(a − b) / a × 100`; `None` when `a` is zero.
pub fn reduction_pct(a: f64, b: f64) -> Option<f64> {
    (a != 0.0).then(|| (a - b) / a * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyDelta {
    pub name: String,
    pub a_ms: f64,
    pub b_ms: f64,
    pub reduction_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyComparison {
    pub layers: Vec<LatencyDelta>,
    pub total: LatencyDelta,
}

/// Per-layer reduction going from `a` to `b`; layers are matched by name.
pub fn compare_latency(a: &LatencyReport, b: &LatencyReport) -> Result<LatencyComparison> {
    let names = |r: &LatencyReport| r.layers.iter().map(|l| l.name.clone()).collect::<Vec<_>>();
    if names(a) != names(b) {
        return Err(Error::TopologyMismatch(format!(
            "layers differ: {:?} vs {:?}",
            names(a),
            names(b)
        )));
    }
    let delta = |name: &str, x: f64, y: f64| LatencyDelta {
        name: name.into(),
        a_ms: x,
        b_ms: y,
        reduction_pct: reduction_pct(x, y),
    };
    Ok(LatencyComparison {
        layers: a
            .layers
            .iter()
            .zip(&b.layers)
            .map(|(x, y)| delta(&x.name, x.latency_ms, y.latency_ms))
            .collect(),
        total: delta("total", a.total_ms, b.total_ms),
    })
}

/// FLOPs of a fully connected layer.
pub fn flops_fc(inputs: u64, outputs: u64) -> u64 {
    (2 * inputs - 1) * outputs
}

/// FLOPs of a convolution over an `h`×`w` output with `k`×`k` kernels.
pub fn flops_conv(h: u64, w: u64, c_in: u64, k: u64, c_out: u64) -> u64 {
    2 * h * w * (c_in * k * k + 1) * c_out
}

pub fn model_flops(model: &TieredModel) -> u64 {
    model
        .layers
        .iter()
        .map(|l| flops_fc(l.inputs as u64, l.outputs as u64))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Tier, TierSpec};
    use proptest::prelude::*;

    fn single(p: NodeParams) -> Topology {
        Topology {
            layers: vec![TopologyLayer {
                name: "L".into(),
                nodes: vec![Node { name: "n".into(), parent: None, params: p }],
            }],
        }
    }

    const WORKED: NodeParams = NodeParams {
        s: 0.5,
        b: 2.0,
        theta: 4.0,
        rho: 0.1,
        lambda_gen: 10.0,
        beta: 1.0,
        phi: 2.0,
    };

    #[test]
    fn worked_example() {
        assert!((layer_latency(&single(WORKED), 1).unwrap() - 3.5).abs() < 1e-12);
        let fwd = NodeParams { s: 0.0, beta: 0.0, ..WORKED };
        assert!((fwd.latency() - 5.0).abs() < 1e-12);
        let fast = NodeParams { phi: 1e12, ..WORKED };
        assert!((fast.latency() - 0.25).abs() < 1e-9);
        assert!(matches!(layer_latency(&single(WORKED), 2), Err(Error::InvalidLayer { layer: 2, count: 1 })));
        assert!(layer_latency(&single(WORKED), 0).is_err());
    }

    #[test]
    fn flops_examples() {
        assert_eq!(flops_fc(3, 2), 10);
        assert_eq!(flops_fc(1, 1), 1);
        assert_eq!(flops_fc(54, 16), 1712);
        assert_eq!(flops_conv(1, 100, 3, 3, 8), 44800);
        assert_eq!(flops_conv(1, 1, 1, 1, 1), 4);
        let m = |s| TieredModel::zeros(s).unwrap();
        assert_eq!(model_flops(&m(TierSpec::student())), 1774);
        assert_eq!(model_flops(&m(TierSpec::new(Tier::Student, vec![2, 2]).unwrap())), 6);
        let (s, a, t) = (m(TierSpec::student()), m(TierSpec::ta()), m(TierSpec::teacher()));
        assert!(model_flops(&t) > model_flops(&a) && model_flops(&a) > model_flops(&s));
    }

    #[test]
    fn reference_topology_is_a_tree() {
        Topology::reference().validate().unwrap();
        let mut bad = Topology::reference();
        bad.layers[1].nodes[0].parent = Some("nowhere".into());
        assert!(matches!(bad.validate(), Err(Error::TopologyMismatch(_))));
        let mut orphan = Topology::reference();
        orphan.layers[0].nodes[0].parent = None;
        assert!(orphan.validate().is_err());
    }

    fn report(volumes: &[u64]) -> CascadeReport {
        let names = ["ED", "MEC1", "CC"];
        let mut r = CascadeReport::empty(names.iter().map(|s| s.to_string()));
        for (l, v) in r.layers.iter_mut().zip(volumes) {
            l.processed_samples = *v;
        }
        r
    }

    #[test]
    fn zero_volume_leaves_compute_floor() {
        let topo = Topology::reference();
        let lat = cascade_latency(&report(&[1000, 0, 0]), &topo, 1.0).unwrap();
        let cc = &topo.layer("CC").unwrap().nodes[0].params;
        assert!((lat.layers[2].latency_ms - cc.s * cc.b / cc.theta * 1e3).abs() < 1e-12);
    }

    #[test]
    fn missing_layer_is_mismatch() {
        let topo = single(WORKED);
        assert!(matches!(cascade_latency(&report(&[1, 1, 1]), &topo, 1.0), Err(Error::TopologyMismatch(_))));
    }

    #[test]
    fn compare_self_is_zero() {
        let lat = cascade_latency(&report(&[500, 200, 50]), &Topology::reference(), 1.0).unwrap();
        let c = compare_latency(&lat, &lat).unwrap();
        assert!(c.layers.iter().all(|d| d.reduction_pct == Some(0.0)));
        assert_eq!(reduction_pct(0.0, 1.0), None);
    }

    proptest! {
        #[test]
        fn monotone_and_linear(
            s in 0.0..=1.0f64, b in 0.0..100.0f64, theta in 0.1..100.0f64, rho in 0.0..=1.0f64,
            lambda in 0.0..100.0f64, beta in 0.0..100.0f64, phi in 0.1..100.0f64, d in 0.0..10.0f64,
        ) {
            let p = NodeParams { s, b, theta, rho, lambda_gen: lambda, beta, phi };
            let l = p.latency();
            let more_lambda = NodeParams { lambda_gen: lambda + d, ..p }.latency();
            let more_beta = NodeParams { beta: beta + d, ..p }.latency();
            let more_b = NodeParams { b: b + d, ..p }.latency();
            let more_theta = NodeParams { theta: theta + d, ..p }.latency();
            let more_phi = NodeParams { phi: phi + d, ..p }.latency();
            prop_assert!(more_lambda >= l - 1e-12 && more_beta >= l - 1e-12 && more_b >= l - 1e-12);
            prop_assert!(more_theta <= l + 1e-12 && more_phi <= l + 1e-12);
            let l0 = NodeParams { beta: 0.0, ..p }.latency();
            let l2 = NodeParams { beta: 2.0 * beta, ..p }.latency();
            prop_assert!(((l2 - l0) - 2.0 * (l - l0)).abs() < 1e-9 * (1.0 + l2.abs()));
        }

        #[test]
        fn conv_second_path(h in 1u64..50, w in 1u64..50, c in 1u64..16, k in 1u64..7, o in 1u64..32) {
            let per_output = c * k * k + 1;
            let mut acc = 0u64;
            for _ in 0..h * w * o { acc += per_output; }
            prop_assert_eq!(flops_conv(h, w, c, k, o), 2 * acc);
        }
    }
}
