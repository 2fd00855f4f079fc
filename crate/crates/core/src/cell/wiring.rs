//! Neural circuit policy (NCP) wiring: a four-layer sparse topology of
//! sensory, inter, command, and motor neurons.
//!
//! Sensory nodes are the cell's inputs (one per feature); the remaining
//! three layers are state neurons. Connections run sensory→inter,
//! inter→command, command⟲command, and command→motor. The builder samples
//! them with a seeded generator and then repairs any neuron left without an
//! incoming synapse, so every build satisfies two structural guarantees:
//! no orphan neurons, and every neuron reachable from the sensory layer.

use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::CellError;
use crate::linalg::Mat;
use crate::scalar::Real;

/// Layer sizes and connectivity degrees for an NCP build.
///
/// `sensory_fanout` and `inter_fanout` are out-degrees toward the next
/// layer. `motor_fanin` is the in-degree of each motor neuron from the
/// command layer (command neurons are fewer than their outgoing synapses, so
/// the last stage is specified from the receiving side). Each degree must
/// not exceed the layer it draws targets or sources from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NcpWiring {
    pub sensory: usize,
    pub inter: usize,
    pub command: usize,
    pub motor: usize,
    pub sensory_fanout: usize,
    pub inter_fanout: usize,
    pub motor_fanin: usize,
    /// Outgoing command→command synapses per command neuron (self-loops
    /// allowed).
    pub recurrent_command: usize,
    pub seed: u64,
}

impl NcpWiring {
    /// Standard shape used by the navigation policies: 12 inter, 8 command,
    /// 3 motor neurons, degrees (4, 4, 4), 4 recurrent command synapses.
    pub fn default_for(sensory: usize, seed: u64) -> Self {
        NcpWiring {
            sensory,
            inter: 12,
            command: 8,
            motor: 3,
            sensory_fanout: 4,
            inter_fanout: 4,
            motor_fanin: 4,
            recurrent_command: 4,
            seed,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.inter + self.command + self.motor
    }

    /// Index of the first motor neuron within the state vector; motor
    /// neurons occupy the tail, which is what the policy readout consumes.
    pub fn motor_offset(&self) -> usize {
        self.inter + self.command
    }

    fn check(&self) -> Result<(), CellError> {
        let bad = |msg: String| Err(CellError::Config(msg));
        if self.sensory == 0 || self.inter == 0 || self.command == 0 || self.motor == 0 {
            return bad("every layer needs at least one neuron".into());
        }
        if self.sensory_fanout == 0 || self.sensory_fanout > self.inter {
            return bad(format!(
                "sensory fan-out {} must be in 1..={} (inter layer size)",
                self.sensory_fanout, self.inter
            ));
        }
        if self.inter_fanout == 0 || self.inter_fanout > self.command {
            return bad(format!(
                "inter fan-out {} must be in 1..={} (command layer size)",
                self.inter_fanout, self.command
            ));
        }
        if self.motor_fanin == 0 || self.motor_fanin > self.command {
            return bad(format!(
                "motor fan-in {} must be in 1..={} (command layer size)",
                self.motor_fanin, self.command
            ));
        }
        if self.recurrent_command > self.command {
            return bad(format!(
                "recurrent out-degree {} exceeds the command layer size {}",
                self.recurrent_command, self.command
            ));
        }
        Ok(())
    }

    /// Sample the adjacency and return it as binary masks over the recurrent
    /// (state×state) and input (state×sensory) weight matrices.
    pub fn build_masks<S: Real>(&self) -> Result<WiringMasks<S>, CellError> {
        self.check()?;
        let d = self.state_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut rec = Mat::zeros(d, d);
        let mut input = Mat::zeros(d, self.sensory);

        let cmd0 = self.inter; // command neuron index range starts here
        let motor0 = self.motor_offset();

        // sensory -> inter
        for s in 0..self.sensory {
            for t in sample(&mut rng, self.inter, self.sensory_fanout) {
                *input.at_mut(t, s) = S::one();
            }
        }
        for t in 0..self.inter {
            let orphan = (0..self.sensory).all(|s| input.at(t, s) == S::zero());
            if orphan {
                let s = rng.random_range(0..self.sensory);
                *input.at_mut(t, s) = S::one();
            }
        }

        // inter -> command
        for i in 0..self.inter {
            for t in sample(&mut rng, self.command, self.inter_fanout) {
                *rec.at_mut(cmd0 + t, i) = S::one();
            }
        }
        for t in 0..self.command {
            let orphan = (0..self.inter).all(|i| rec.at(cmd0 + t, i) == S::zero());
            if orphan {
                let i = rng.random_range(0..self.inter);
                *rec.at_mut(cmd0 + t, i) = S::one();
            }
        }

        // command -> command: each command neuron sends `recurrent_command`
        // synapses to distinct targets (possibly including itself)
        for src in 0..self.command {
            for dst in sample(&mut rng, self.command, self.recurrent_command) {
                *rec.at_mut(cmd0 + dst, cmd0 + src) = S::one();
            }
        }

        // command -> motor, specified by receiver fan-in
        for t in 0..self.motor {
            for src in sample(&mut rng, self.command, self.motor_fanin) {
                *rec.at_mut(motor0 + t, cmd0 + src) = S::one();
            }
        }

        Ok(WiringMasks { recurrent: rec, input, inter: self.inter, command: self.command, motor: self.motor })
    }
}

/// Binary adjacency of a built NCP, split into the two mask shapes the cell
/// consumes.
#[derive(Clone, Debug, PartialEq)]
pub struct WiringMasks<S> {
    pub recurrent: Mat<S>,
    pub input: Mat<S>,
    pub inter: usize,
    pub command: usize,
    pub motor: usize,
}

impl<S: Real> WiringMasks<S> {
    pub fn state_dim(&self) -> usize {
        self.inter + self.command + self.motor
    }

    /// Live synapse count (recurrent plus input).
    pub fn synapses(&self) -> usize {
        let ones = |m: &Mat<S>| m.data().iter().filter(|&&v| v != S::zero()).count();
        ones(&self.recurrent) + ones(&self.input)
    }
}
