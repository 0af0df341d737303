//! DNA sequences over the fixed alphabet `A, C, G, T`, their one-hot
//! encodings, and standard-genetic-code translation.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Alphabet in index order.
pub const ALPHABET: [u8; 4] = *b"ACGT";
pub const ALPHABET_SIZE: usize = 4;

/// Amino-acid symbol emitted for stop codons.
pub const STOP: u8 = b'*';

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeqError {
    #[error("invalid nucleotide {0:?} at position {1}")]
    InvalidSymbol(char, usize),
    #[error("invalid amino acid {0:?} at position {1}")]
    InvalidResidue(char, usize),
    #[error("empty sequence")]
    Empty,
    #[error("row {0} of one-hot matrix is not one-hot")]
    RowNotOneHot(usize),
    #[error("sequence length {0} is not a multiple of three")]
    LengthNotMultipleOfThree(usize),
    #[error("protein contains an internal stop at residue {0}")]
    InternalStop(usize),
}

/// A nucleotide sequence stored as alphabet indices in `0..4`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sequence(Vec<u8>);

impl Sequence {
    pub fn from_indices(symbols: Vec<u8>) -> Result<Self, SeqError> {
        if symbols.is_empty() {
            return Err(SeqError::Empty);
        }
        if let Some(pos) = symbols.iter().position(|&s| s as usize >= ALPHABET_SIZE) {
            return Err(SeqError::InvalidSymbol(symbols[pos] as char, pos));
        }
        Ok(Self(symbols))
    }

    /// Decodes a lexicographic rank (`A < C < G < T`, first position most
    /// significant) into a sequence of the given length.
    pub fn from_rank(mut rank: u64, len: usize) -> Self {
        let mut symbols = vec![0u8; len];
        for slot in symbols.iter_mut().rev() {
            *slot = (rank % 4) as u8;
            rank /= 4;
        }
        Self(symbols)
    }

    /// Inverse of [`Sequence::from_rank`].
    pub fn rank(&self) -> u64 {
        self.0.iter().fold(0u64, |acc, &s| acc * 4 + s as u64)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[u8] {
        &self.0
    }

    pub fn into_symbols(self) -> Vec<u8> {
        self.0
    }

    pub fn hamming(&self, other: &Sequence) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }
}

impl FromStr for Sequence {
    type Err = SeqError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let symbols = s
            .chars()
            .enumerate()
            .map(|(i, c)| match c.to_ascii_uppercase() {
                'A' => Ok(0),
                'C' => Ok(1),
                'G' => Ok(2),
                'T' => Ok(3),
                _ => Err(SeqError::InvalidSymbol(c, i)),
            })
            .collect::<Result<Vec<u8>, _>>()?;
        Self::from_indices(symbols)
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.0.iter().map(|&i| ALPHABET[i as usize] as char).collect();
        f.write_str(&s)
    }
}

impl fmt::Debug for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sequence({self})")
    }
}

impl Serialize for Sequence {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Sequence {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `L x 4` indicator matrix; rows follow sequence positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OneHot {
    rows: Vec<[u8; 4]>,
}

impl OneHot {
    /// Wraps a raw matrix without validation; [`decode_one_hot`] checks it.
    pub fn from_rows(rows: Vec<[u8; 4]>) -> Self {
        Self { rows }
    }

    pub fn rows(&self) -> &[[u8; 4]] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Row-major flattening to `4L` reals, the layout oracles consume.
    pub fn flatten(&self) -> Vec<f64> {
        self.rows.iter().flat_map(|row| row.iter().map(|&v| v as f64)).collect()
    }
}

pub fn encode_one_hot(seq: &Sequence) -> OneHot {
    let rows = seq
        .symbols()
        .iter()
        .map(|&s| {
            let mut row = [0u8; 4];
            row[s as usize] = 1;
            row
        })
        .collect();
    OneHot { rows }
}

pub fn decode_one_hot(m: &OneHot) -> Result<Sequence, SeqError> {
    let symbols = m
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let ones = row.iter().filter(|&&v| v == 1).count();
            let others = row.iter().filter(|&&v| v > 1).count();
            if ones != 1 || others != 0 {
                return Err(SeqError::RowNotOneHot(i));
            }
            Ok(row.iter().position(|&v| v == 1).unwrap() as u8)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Sequence::from_indices(symbols)
}

// NCBI translation table 1, codons enumerated in T, C, A, G order.
const NCBI_TABLE_TCAG: &[u8; 64] = b"FFLLSSSSYY**CC*WLLLLPPPPHHQQRRRRIIIMTTTTNNKKSSRRVVVVAAAADDEEGGGG";

const fn build_codon_table() -> [u8; 64] {
    // maps ACGT index -> TCAG index
    const TO_TCAG: [usize; 4] = [2, 1, 3, 0];
    let mut table = [0u8; 64];
    let mut i = 0;
    while i < 64 {
        let (a, b, c) = (i / 16, (i / 4) % 4, i % 4);
        let j = TO_TCAG[a] * 16 + TO_TCAG[b] * 4 + TO_TCAG[c];
        table[i] = NCBI_TABLE_TCAG[j];
        i += 1;
    }
    table
}

/// Standard genetic code indexed by `16*first + 4*second + third` in
/// alphabet index order.
pub const CODON_TABLE: [u8; 64] = build_codon_table();

pub const AMINO_ACIDS: &[u8; 20] = b"ACDEFGHIKLMNPQRSTVWY";

/// All codons (as 3-symbol index triples) that translate to `residue`, in
/// ascending codon rank.
pub fn codons_for(residue: u8) -> Vec<[u8; 3]> {
    CODON_TABLE
        .iter()
        .enumerate()
        .filter(|(_, &aa)| aa == residue)
        .map(|(i, _)| [(i / 16) as u8, ((i / 4) % 4) as u8, (i % 4) as u8])
        .collect()
}

pub fn translate_codon(codon: [u8; 3]) -> u8 {
    CODON_TABLE[codon[0] as usize * 16 + codon[1] as usize * 4 + codon[2] as usize]
}

/// An amino-acid string over the 20 standard residues plus [`STOP`].
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Protein(Vec<u8>);

impl Protein {
    pub fn residues(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn stop_position(&self) -> Option<usize> {
        self.0.iter().position(|&r| r == STOP)
    }
}

impl FromStr for Protein {
    type Err = SeqError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let residues = s
            .chars()
            .enumerate()
            .map(|(i, c)| {
                let u = c.to_ascii_uppercase() as u8;
                if c.is_ascii() && (AMINO_ACIDS.contains(&u) || u == STOP) {
                    Ok(u)
                } else {
                    Err(SeqError::InvalidResidue(c, i))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        if residues.is_empty() {
            return Err(SeqError::Empty);
        }
        Ok(Self(residues))
    }
}

impl fmt::Display for Protein {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(std::str::from_utf8(&self.0).expect("ascii residues"))
    }
}

impl fmt::Debug for Protein {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Protein({self})")
    }
}

pub fn translate(dna: &Sequence) -> Result<Protein, SeqError> {
    if !dna.len().is_multiple_of(3) {
        return Err(SeqError::LengthNotMultipleOfThree(dna.len()));
    }
    let residues = dna.symbols().chunks_exact(3).map(|c| translate_codon([c[0], c[1], c[2]])).collect();
    Ok(Protein(residues))
}

/// Number of DNA sequences that translate to `protein`.
pub fn count_synonymous(protein: &Protein) -> Result<BigUint, SeqError> {
    if let Some(pos) = protein.stop_position() {
        return Err(SeqError::InternalStop(pos));
    }
    Ok(protein.residues().iter().fold(BigUint::from(1u32), |acc, &r| acc * codons_for(r).len()))
}
