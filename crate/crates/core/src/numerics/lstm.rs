use super::tape::{Tape, Var};
use crate::error::{Error, Result};

pub use super::tape::LstmWeights;

/// One LSTM step with the gate layout `[input, forget, cell, output]`:
///
/// ```text
/// a  = W_ih x + b_ih + W_hh h + b_hh
/// c' = σ(a_f) ⊙ c + σ(a_i) ⊙ tanh(a_g)
/// h' = σ(a_o) ⊙ tanh(c')
/// ```
pub fn lstm_cell(tape: &mut Tape<'_>, x: Var, h: Var, c: Var, w: LstmWeights) -> Result<(Var, Var)> {
    tape.lstm_cell(x, h, c, w)
}

/// Runs a forward and a backward LSTM over `seq` from zero states and returns
/// `[h_fwd_last; h_bwd_last]`, where the backward pass walks from the last
/// element to the first.
pub fn bilstm(tape: &mut Tape<'_>, seq: &[Var], fwd: LstmWeights, bwd: LstmWeights) -> Result<Var> {
    if seq.is_empty() {
        return Err(Error::EmptyInput("bilstm"));
    }
    let h_fwd = run(tape, seq.iter().copied(), fwd)?;
    let h_bwd = run(tape, seq.iter().rev().copied(), bwd)?;
    tape.concat(&[h_fwd, h_bwd])
}

fn run(tape: &mut Tape<'_>, seq: impl Iterator<Item = Var>, w: LstmWeights) -> Result<Var> {
    let hid = match tape.shape(w.w_hh) {
        [_, h] => *h,
        s => {
            return Err(crate::error::dim_err("bilstm", "a [4h, h] recurrent weight", format!("{s:?}")));
        }
    };
    let mut h = tape.zeros(hid);
    let mut c = tape.zeros(hid);
    for x in seq {
        (h, c) = tape.lstm_cell(x, h, c, w)?;
    }
    Ok(h)
}
