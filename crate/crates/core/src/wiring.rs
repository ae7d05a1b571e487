//! Four-layer neural circuit policy wiring.
//!
//! Neurons are numbered sensory, inter, command, motor, in that order.
//! Synapses are allowed only along sensory→inter, inter→command,
//! command→command and command→motor; each carries a polarity of ±1.
//! The sensory layer is the cell input, the other three layers are the
//! cell's units.

use std::collections::VecDeque;
use std::fmt;
use std::ops::Range;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Tensor;
use crate::cells::{Cell, SparsityMask};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Layer {
    Sensory,
    Inter,
    Command,
    Motor,
}

impl Layer {
    pub const ALL: [Layer; 4] = [Layer::Sensory, Layer::Inter, Layer::Command, Layer::Motor];

    fn index(self) -> usize {
        self as usize
    }
}

/// Synapse blocks that may carry connections, as `(from, to)`.
pub const ALLOWED_BLOCKS: [(Layer, Layer); 4] = [
    (Layer::Sensory, Layer::Inter),
    (Layer::Inter, Layer::Command),
    (Layer::Command, Layer::Command),
    (Layer::Command, Layer::Motor),
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WiringConfig {
    pub n_sensory: usize,
    pub n_inter: usize,
    pub n_command: usize,
    pub n_motor: usize,
    /// Outgoing synapses per sensory neuron.
    pub fanout_sensory: usize,
    /// Outgoing synapses per inter neuron.
    pub fanout_inter: usize,
    /// Incoming synapses per motor neuron.
    pub fanin_motor: usize,
    /// Synapses inside the command layer.
    pub n_command_recurrent: usize,
    pub seed: u64,
}

impl WiringConfig {
    /// 16 inter + 10 command + 4 motor (30 units), fanouts 4/4, motor
    /// fan-in 4 and `2·n_command` recurrent command synapses.
    pub fn default_for(n_sensory: usize, seed: u64) -> Self {
        Self {
            n_sensory,
            n_inter: 16,
            n_command: 10,
            n_motor: 4,
            fanout_sensory: 4,
            fanout_inter: 4,
            fanin_motor: 4,
            n_command_recurrent: 20,
            seed,
        }
    }

    pub fn n_units(&self) -> usize {
        self.n_inter + self.n_command + self.n_motor
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_sensory", self.n_sensory),
            ("n_inter", self.n_inter),
            ("n_command", self.n_command),
            ("n_motor", self.n_motor),
            ("fanout_sensory", self.fanout_sensory),
            ("fanout_inter", self.fanout_inter),
            ("fanin_motor", self.fanin_motor),
            ("n_command_recurrent", self.n_command_recurrent),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("wiring: {name} must be >= 1")));
        }
        let limits = [
            ("fanout_sensory", self.fanout_sensory, "n_inter", self.n_inter),
            ("fanout_inter", self.fanout_inter, "n_command", self.n_command),
            ("fanin_motor", self.fanin_motor, "n_command", self.n_command),
            (
                "n_command_recurrent",
                self.n_command_recurrent,
                "n_command²",
                self.n_command * self.n_command,
            ),
        ];
        for (name, v, limit_name, limit) in limits {
            if v > limit {
                return Err(Error::InvalidArgument(format!(
                    "wiring: {name} = {v} exceeds {limit_name} = {limit}"
                )));
            }
        }
        Ok(())
    }
}

/// Signed adjacency over all neurons, `adjacency[src * n + dst] ∈ {-1, 0, 1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Wiring {
    sizes: [usize; 4],
    adjacency: Vec<i8>,
}

impl Wiring {
    /// Empty wiring with the given layer sizes (sensory, inter, command, motor).
    pub fn empty(sizes: [usize; 4]) -> Self {
        let n: usize = sizes.iter().sum();
        Self {
            sizes,
            adjacency: vec![0; n * n],
        }
    }

    pub fn sizes(&self) -> [usize; 4] {
        self.sizes
    }

    pub fn n_neurons(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn n_sensory(&self) -> usize {
        self.sizes[0]
    }

    /// Inter + command + motor.
    pub fn n_units(&self) -> usize {
        self.n_neurons() - self.n_sensory()
    }

    /// Neuron indices of a layer.
    pub fn layer_range(&self, layer: Layer) -> Range<usize> {
        let start: usize = self.sizes[..layer.index()].iter().sum();
        start..start + self.sizes[layer.index()]
    }

    /// Unit indices (neuron index minus `n_sensory`) of the motor layer.
    pub fn motor_units(&self) -> Range<usize> {
        let r = self.layer_range(Layer::Motor);
        r.start - self.n_sensory()..r.end - self.n_sensory()
    }

    pub fn layer_of(&self, neuron: usize) -> Layer {
        Layer::ALL
            .into_iter()
            .find(|&l| self.layer_range(l).contains(&neuron))
            .expect("neuron index out of range")
    }

    pub fn synapse(&self, src: usize, dst: usize) -> i8 {
        self.adjacency[src * self.n_neurons() + dst]
    }

    /// Sets a synapse; `polarity` must be -1, 0 or 1.
    pub fn set_synapse(&mut self, src: usize, dst: usize, polarity: i8) {
        assert!((-1..=1).contains(&polarity));
        let n = self.n_neurons();
        self.adjacency[src * n + dst] = polarity;
    }

    /// Nonzero count in the `from → to` block.
    pub fn count(&self, from: Layer, to: Layer) -> usize {
        let (rs, rd) = (self.layer_range(from), self.layer_range(to));
        rs.flat_map(|s| rd.clone().map(move |d| (s, d)))
            .filter(|&(s, d)| self.synapse(s, d) != 0)
            .count()
    }

    pub fn total_synapses(&self) -> usize {
        self.adjacency.iter().filter(|&&v| v != 0).count()
    }

    /// Signed `n_units × n_sensory` mask over cell input weights.
    pub fn input_mask(&self) -> Tensor {
        let (ns, nu) = (self.n_sensory(), self.n_units());
        let mut data = vec![0.0; nu * ns];
        for u in 0..nu {
            for s in 0..ns {
                data[u * ns + s] = f64::from(self.synapse(s, ns + u));
            }
        }
        Tensor::matrix(nu, ns, data).expect("sized")
    }

    /// Signed `n_units × n_units` mask over recurrent weights
    /// (row = receiving unit, column = sending unit).
    pub fn recurrent_mask(&self) -> Tensor {
        let (ns, nu) = (self.n_sensory(), self.n_units());
        let mut data = vec![0.0; nu * nu];
        for dst in 0..nu {
            for src in 0..nu {
                data[dst * nu + src] = f64::from(self.synapse(ns + src, ns + dst));
            }
        }
        Tensor::matrix(nu, nu, data).expect("sized")
    }

    /// Fraction of nonzero entries in [`Wiring::recurrent_mask`].
    pub fn recurrent_density(&self) -> f64 {
        let m = self.recurrent_mask();
        m.data().iter().filter(|&&v| v != 0.0).count() as f64 / m.numel() as f64
    }

    pub(crate) fn adjacency(&self) -> &[i8] {
        &self.adjacency
    }

    pub(crate) fn from_parts(sizes: [usize; 4], adjacency: Vec<i8>) -> Result<Self> {
        let n: usize = sizes.iter().sum();
        if adjacency.len() != n * n || adjacency.iter().any(|v| !(-1..=1).contains(v)) {
            return Err(Error::InvalidArgument("wiring: malformed adjacency".into()));
        }
        Ok(Self { sizes, adjacency })
    }
}

fn polarity(rng: &mut impl Rng) -> i8 {
    if rng.random_bool(0.5) {
        1
    } else {
        -1
    }
}

/// Draws a wiring. Deterministic in `cfg` (including its seed).
pub fn build_wiring(cfg: &WiringConfig) -> Result<Wiring> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut w = Wiring::empty([cfg.n_sensory, cfg.n_inter, cfg.n_command, cfg.n_motor]);
    let sensory = w.layer_range(Layer::Sensory);
    let inter = w.layer_range(Layer::Inter);
    let command = w.layer_range(Layer::Command);
    let motor = w.layer_range(Layer::Motor);

    for s in sensory.clone() {
        for k in index::sample(&mut rng, inter.len(), cfg.fanout_sensory) {
            let p = polarity(&mut rng);
            w.set_synapse(s, inter.start + k, p);
        }
    }
    for i in inter.clone() {
        for k in index::sample(&mut rng, command.len(), cfg.fanout_inter) {
            let p = polarity(&mut rng);
            w.set_synapse(i, command.start + k, p);
        }
    }
    let nc = command.len();
    for k in index::sample(&mut rng, nc * nc, cfg.n_command_recurrent) {
        let p = polarity(&mut rng);
        w.set_synapse(command.start + k / nc, command.start + k % nc, p);
    }
    for m in motor.clone() {
        for k in index::sample(&mut rng, nc, cfg.fanin_motor) {
            let p = polarity(&mut rng);
            w.set_synapse(command.start + k, m, p);
        }
    }

    // Repair: every inter neuron needs a sensory source, every command
    // neuron an inter source and somewhere to send to.
    for i in inter.clone() {
        if sensory.clone().all(|s| w.synapse(s, i) == 0) {
            let s = rng.random_range(sensory.clone());
            let p = polarity(&mut rng);
            w.set_synapse(s, i, p);
        }
    }
    for c in command.clone() {
        if inter.clone().all(|i| w.synapse(i, c) == 0) {
            let i = rng.random_range(inter.clone());
            let p = polarity(&mut rng);
            w.set_synapse(i, c, p);
        }
        if command.clone().chain(motor.clone()).all(|d| w.synapse(c, d) == 0) {
            let m = rng.random_range(motor.clone());
            let p = polarity(&mut rng);
            w.set_synapse(c, m, p);
        }
    }
    Ok(w)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// Synapse outside the four allowed blocks.
    BlockStructure { src: usize, dst: usize },
    /// Motor neuron not reachable from any sensory neuron.
    Unreachable { motor: usize },
    /// Non-sensory, non-motor neuron without incoming synapses.
    NoIncoming { neuron: usize },
    /// Non-motor neuron without outgoing synapses.
    NoOutgoing { neuron: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BlockStructure { src, dst } => {
                write!(f, "synapse {src}->{dst} lies outside the allowed layer blocks")
            }
            Violation::Unreachable { motor } => {
                write!(f, "motor neuron {motor} is unreachable from the sensory layer")
            }
            Violation::NoIncoming { neuron } => write!(f, "neuron {neuron} has no incoming synapse"),
            Violation::NoOutgoing { neuron } => write!(f, "neuron {neuron} has no outgoing synapse"),
        }
    }
}

/// Checks block structure, motor reachability and isolated neurons.
/// An empty list means the wiring is valid.
pub fn validate_wiring(w: &Wiring) -> Vec<Violation> {
    let n = w.n_neurons();
    let mut out = Vec::new();
    for src in 0..n {
        for dst in 0..n {
            if w.synapse(src, dst) != 0 && !ALLOWED_BLOCKS.contains(&(w.layer_of(src), w.layer_of(dst))) {
                out.push(Violation::BlockStructure { src, dst });
            }
        }
    }

    let mut reached = vec![false; n];
    let mut queue: VecDeque<usize> = w.layer_range(Layer::Sensory).collect();
    for &s in &queue {
        reached[s] = true;
    }
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if w.synapse(u, v) != 0 && !reached[v] {
                reached[v] = true;
                queue.push_back(v);
            }
        }
    }
    for m in w.layer_range(Layer::Motor) {
        if !reached[m] {
            out.push(Violation::Unreachable { motor: m });
        }
    }

    let motor = w.layer_range(Layer::Motor);
    let sensory = w.layer_range(Layer::Sensory);
    for u in 0..n {
        if !sensory.contains(&u) && !motor.contains(&u) && (0..n).all(|s| w.synapse(s, u) == 0) {
            out.push(Violation::NoIncoming { neuron: u });
        }
        if !motor.contains(&u) && (0..n).all(|d| w.synapse(u, d) == 0) {
            out.push(Violation::NoOutgoing { neuron: u });
        }
    }
    out
}

/// Multiplies the cell's input and recurrent weights by the signed wiring
/// masks and installs the 0/1 pattern so masked entries stay zero (and get
/// no gradient) from then on.
pub fn apply_masks(w: &Wiring, cell: &mut Cell) -> Result<()> {
    if cell.n_units() != w.n_units() || cell.n_inputs() != w.n_sensory() {
        return Err(Error::InvalidArgument(format!(
            "apply_masks: cell has {} units / {} inputs, wiring needs {} / {}",
            cell.n_units(),
            cell.n_inputs(),
            w.n_units(),
            w.n_sensory()
        )));
    }
    apply_signed_mask(
        cell,
        &SparsityMask {
            input: w.input_mask(),
            recurrent: w.recurrent_mask(),
        },
    )
}

/// Lower-level form of [`apply_masks`] taking the signed masks directly.
pub fn apply_signed_mask(cell: &mut Cell, signed: &SparsityMask) -> Result<()> {
    let (nu, ni) = (cell.n_units(), cell.n_inputs());
    if signed.input.shape() != [nu, ni] || signed.recurrent.shape() != [nu, nu] {
        return Err(Error::ShapeMismatch {
            op: "apply_masks",
            left: vec![nu, ni],
            right: signed.input.shape().to_vec(),
        });
    }
    let pattern = SparsityMask {
        input: signed.input.map(|v| if v != 0.0 { 1.0 } else { 0.0 }),
        recurrent: signed.recurrent.map(|v| if v != 0.0 { 1.0 } else { 0.0 }),
    };
    let gates = match cell {
        Cell::Ltc(c) => {
            c.mask = Some(pattern);
            vec![&mut c.gate]
        }
        Cell::Cfc(c) => {
            c.mask = Some(pattern);
            vec![&mut c.f, &mut c.g, &mut c.h]
        }
        Cell::Gru(_) => {
            return Err(Error::InvalidArgument("apply_masks: GRU cells take no wiring".into()));
        }
    };
    for g in gates {
        for (wt, m) in [(&mut g.w_in, &signed.input), (&mut g.w_rec, &signed.recurrent)] {
            for (v, &k) in wt.data_mut().iter_mut().zip(m.data()) {
                *v *= k;
            }
        }
    }
    Ok(())
}

/// Builds a cell wired as an NCP whose readout listens to the motor layer only.
pub fn ncp_cell(
    kind: crate::cells::CellKind,
    wiring: &Wiring,
    n_outputs: usize,
    rng: &mut impl Rng,
) -> Result<Cell> {
    let mut cell = Cell::new(kind, rng, wiring.n_sensory(), wiring.n_units(), n_outputs);
    let from = wiring.motor_units().start;
    *cell.readout_mut() = crate::cells::Readout::init(rng, wiring.n_units(), from, n_outputs);
    apply_masks(wiring, &mut cell)?;
    Ok(cell)
}
