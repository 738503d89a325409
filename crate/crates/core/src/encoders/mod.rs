//! Character tokenization of SMILES / FASTA strings and the sequence encoders.

mod encoder;
mod vocab;

pub use encoder::{encode, ConvLayer, EncoderConfig, EncoderKind, EncoderVars};
pub use vocab::{tokenize, SequenceKind, TokenSequence, Vocabulary, PAD_ID, UNK_ID};
