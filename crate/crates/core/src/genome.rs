//! Quantum genes: the `TYPE | PLACE | INCLUDED` bitstring encoding of a
//! circuit architecture, and its decoding into an executable [`Circuit`].
//!
//! A gene is `3 + w + 1` bits, most significant bit first:
//!
//! | segment  | bits | meaning                                          |
//! |----------|------|--------------------------------------------------|
//! | TYPE     | 3    | gate kind, `000 = RX` … `111 = CRZ`              |
//! | PLACE    | w    | acting qubit (control qubit for two-qubit gates) |
//! | INCLUDED | 1    | `1` dominant (in circuit), `0` recessive         |
//!
//! Two-qubit gates always target the ring neighbour `(control + 1) mod n`.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::simulator::{Circuit, GateKind, MAX_QUBITS};

pub const TYPE_BITS: usize = 3;

/// PLACE segment width for a register: `max(2, ⌈log₂ n⌉)`.
pub fn place_width_for(n_qubits: usize) -> usize {
    let bits = usize::BITS - (n_qubits.max(1) - 1).leading_zeros();
    (bits as usize).max(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Gene {
    pub kind: GateKind,
    /// Acting qubit, or the control qubit of a two-qubit gate.
    pub place: usize,
    pub included: bool,
}

impl Gene {
    pub fn new(kind: GateKind, place: usize, included: bool) -> Self {
        Gene { kind, place, included }
    }
}

fn parse_bits(bits: &str) -> Result<usize> {
    bits.chars().try_fold(0usize, |acc, ch| match ch {
        '0' => Ok(acc << 1),
        '1' => Ok((acc << 1) | 1),
        other => Err(Error::Parse(format!("unexpected character {other:?} in bitstring"))),
    })
}

/// Decodes one gene of `3 + place_width + 1` bits.
pub fn decode_gene(bits: &str, n_qubits: usize, place_width: usize) -> Result<Gene> {
    let len = TYPE_BITS + place_width + 1;
    if bits.len() != len {
        return Err(Error::Parse(format!(
            "gene {bits:?} has {} bits, expected {len}",
            bits.len()
        )));
    }
    let type_code = parse_bits(&bits[..TYPE_BITS])?;
    let place = parse_bits(&bits[TYPE_BITS..TYPE_BITS + place_width])?;
    let included = parse_bits(&bits[len - 1..])? == 1;
    if place >= n_qubits {
        return Err(Error::Parse(format!(
            "PLACE code {place} out of range for {n_qubits} qubits"
        )));
    }
    let kind = GateKind::from_code(type_code as u8).expect("3-bit code is always a valid gate");
    Ok(Gene { kind, place, included })
}

pub fn encode_gene(gene: &Gene, place_width: usize) -> String {
    format!(
        "{:03b}{:0w$b}{}",
        gene.kind.code(),
        gene.place,
        u8::from(gene.included),
        w = place_width
    )
}

/// Initial genome size: whole blocks or a gate count truncated in layer order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialSize {
    Blocks(usize),
    Gates(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayoutSpec {
    pub n_qubits: usize,
    pub size: InitialSize,
    pub seed: u64,
}

impl LayoutSpec {
    pub fn blocks(n_qubits: usize, n_blocks: usize, seed: u64) -> Self {
        LayoutSpec {
            n_qubits,
            size: InitialSize::Blocks(n_blocks),
            seed,
        }
    }

    pub fn gates(n_qubits: usize, n_gates: usize, seed: u64) -> Self {
        LayoutSpec {
            n_qubits,
            size: InitialSize::Gates(n_gates),
            seed,
        }
    }

    /// Number of genes a genome generated from this layout carries.
    pub fn gene_count(&self) -> usize {
        match self.size {
            InitialSize::Blocks(b) => b * 2 * self.n_qubits,
            InitialSize::Gates(g) => g,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits < 2 || self.n_qubits > MAX_QUBITS {
            return Err(Error::Config(format!(
                "layout needs 2..={MAX_QUBITS} qubits, got {}",
                self.n_qubits
            )));
        }
        if self.gene_count() == 0 {
            return Err(Error::Config("layout must contain at least one gate".into()));
        }
        Ok(())
    }
}

/// An ordered list of genes over a fixed register.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Genome {
    n_qubits: usize,
    place_width: usize,
    genes: Vec<Gene>,
}

impl Genome {
    pub fn new(n_qubits: usize, genes: Vec<Gene>) -> Result<Self> {
        if !(2..=MAX_QUBITS).contains(&n_qubits) {
            return Err(Error::Geometry(format!(
                "genomes need 2..={MAX_QUBITS} qubits, got {n_qubits}"
            )));
        }
        if let Some(g) = genes.iter().find(|g| g.place >= n_qubits) {
            return Err(Error::Geometry(format!(
                "gene place q{} outside {n_qubits}-qubit register",
                g.place
            )));
        }
        Ok(Genome {
            n_qubits,
            place_width: place_width_for(n_qubits),
            genes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn place_width(&self) -> usize {
        self.place_width
    }

    pub fn gene_width(&self) -> usize {
        TYPE_BITS + self.place_width + 1
    }

    pub fn genes(&self) -> &[Gene] {
        &self.genes
    }

    pub(crate) fn genes_mut(&mut self) -> &mut [Gene] {
        &mut self.genes
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn dominant_count(&self) -> usize {
        self.genes.iter().filter(|g| g.included).count()
    }

    pub fn dominant_param_count(&self) -> usize {
        self.genes
            .iter()
            .filter(|g| g.included && g.kind.is_parameterized())
            .count()
    }

    /// Gene indices of the dominant parameterized genes, in parameter-slot order.
    pub fn param_gene_indices(&self) -> Vec<usize> {
        self.genes
            .iter()
            .enumerate()
            .filter(|(_, g)| g.included && g.kind.is_parameterized())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn to_bitstring(&self) -> String {
        self.genes.iter().map(|g| encode_gene(g, self.place_width)).collect()
    }

    pub fn from_bitstring(n_qubits: usize, place_width: usize, bits: &str) -> Result<Self> {
        if place_width != place_width_for(n_qubits) {
            return Err(Error::Parse(format!(
                "place_width {place_width} does not match {} for {n_qubits} qubits",
                place_width_for(n_qubits)
            )));
        }
        let width = TYPE_BITS + place_width + 1;
        if bits.is_empty() || !bits.len().is_multiple_of(width) {
            return Err(Error::Parse(format!(
                "bitstring length {} is not a positive multiple of the gene width {width}",
                bits.len()
            )));
        }
        if !bits.is_ascii() {
            return Err(Error::Parse("bitstring must be ASCII '0'/'1'".into()));
        }
        let genes = (0..bits.len() / width)
            .map(|i| decode_gene(&bits[i * width..(i + 1) * width], n_qubits, place_width))
            .collect::<Result<Vec<_>>>()?;
        Genome::new(n_qubits, genes).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Two-line text form: `n_qubits=<n> place_width=<w>` then the bitstring.
    pub fn to_text(&self) -> String {
        format!(
            "n_qubits={} place_width={}\n{}\n",
            self.n_qubits,
            self.place_width,
            self.to_bitstring()
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty genome file".into()))?;
        let bits = lines
            .next()
            .ok_or_else(|| Error::Parse("genome file has no bitstring line".into()))?;
        if lines.next().is_some() {
            return Err(Error::Parse("trailing content after bitstring".into()));
        }
        let mut n_qubits = None;
        let mut place_width = None;
        for field in header.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad header field {field:?}")))?;
            let value: usize = value
                .parse()
                .map_err(|_| Error::Parse(format!("bad integer in header field {field:?}")))?;
            match key {
                "n_qubits" => n_qubits = Some(value),
                "place_width" => place_width = Some(value),
                _ => return Err(Error::Parse(format!("unknown header key {key:?}"))),
            }
        }
        let n_qubits = n_qubits.ok_or_else(|| Error::Parse("header missing n_qubits".into()))?;
        let place_width = place_width.ok_or_else(|| Error::Parse("header missing place_width".into()))?;
        Genome::from_bitstring(n_qubits, place_width, bits)
    }

    /// Executable circuit of the dominant genes, in gene order.
    pub fn to_circuit(&self) -> Circuit {
        let mut circuit = Circuit::new(self.n_qubits).expect("genome qubit count validated at construction");
        for gene in self.genes.iter().filter(|g| g.included) {
            let control = gene.kind.is_two_qubit().then_some(gene.place);
            let target = if gene.kind.is_two_qubit() {
                (gene.place + 1) % self.n_qubits
            } else {
                gene.place
            };
            circuit
                .push(gene.kind, control, target)
                .expect("genome genes always decode to valid gates");
        }
        circuit
    }

    /// Compact human-readable listing of the dominant gates.
    pub fn describe(&self) -> String {
        self.to_circuit().to_string()
    }
}

impl fmt::Display for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bitstring())
    }
}

/// Random genome in the block layout: per block, one uniformly random
/// single-qubit gate on each of `q0..q(n-1)`, then one uniformly random
/// two-qubit gate controlled on each qubit in ring order. A gate-count size
/// truncates the last block in that order. All genes start dominant.
pub fn random_genome<R: Rng + ?Sized>(layout: &LayoutSpec, rng: &mut R) -> Result<Genome> {
    layout.validate()?;
    let n = layout.n_qubits;
    let genes = (0..layout.gene_count())
        .map(|i| {
            let pos = i % (2 * n);
            let (pool, place) = if pos < n {
                (&GateKind::SINGLE_QUBIT, pos)
            } else {
                (&GateKind::TWO_QUBIT, pos - n)
            };
            Gene::new(pool[rng.gen_range(0..pool.len())], place, true)
        })
        .collect();
    Genome::new(n, genes)
}
