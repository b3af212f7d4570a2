//! Recursive separator splitting for prose and source code.

use super::{char_len, ChunkError};

#[derive(Debug, Clone, Copy)]
enum Sep {
    Lit(&'static str),
    /// `.`, `!` or `?` followed by a space; the split falls after the space.
    SentenceEnd,
    Char,
}

const PLAIN: &[Sep] = &[Sep::Lit("\n\n"), Sep::Lit("\n"), Sep::SentenceEnd, Sep::Lit(" "), Sep::Char];
const CODE: &[Sep] = &[Sep::Lit("\n\n"), Sep::Lit("\n"), Sep::Lit(" "), Sep::Char];

/// Splits prose on blank lines, then newlines, sentence ends, spaces and
/// finally single characters.
///
/// Each chunk after the first starts with the last `min(overlap_chars, len)`
/// characters of its predecessor; dropping those prefixes and concatenating
/// gives back `text`.
pub fn split_plain(text: &str, max_chunk_chars: usize, overlap_chars: usize) -> Result<Vec<String>, ChunkError> {
    split_with(text, max_chunk_chars, overlap_chars, PLAIN)
}

/// Like [`split_plain`] but only breaks inside a line when that line alone
/// exceeds the budget.
pub fn split_code(text: &str, max_chunk_chars: usize, overlap_chars: usize) -> Result<Vec<String>, ChunkError> {
    split_with(text, max_chunk_chars, overlap_chars, CODE)
}

fn split_with(text: &str, max: usize, overlap: usize, seps: &[Sep]) -> Result<Vec<String>, ChunkError> {
    if max <= overlap {
        return Err(ChunkError::InvalidLimits { max, overlap });
    }
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let mut parts = Vec::new();
    split_rec(text, 0, max - overlap, seps, &mut parts);

    let mut chunks = Vec::with_capacity(parts.len());
    let mut prev: Option<(usize, usize)> = None;
    for (start, end) in parts {
        let from = match prev {
            Some((ps, pe)) if overlap > 0 => back_chars(text, pe, overlap.min(char_len(&text[ps..pe]))),
            _ => start,
        };
        chunks.push(text[from..end].to_owned());
        prev = Some((from, end));
    }
    Ok(chunks)
}

/// Byte offset `n` characters before `pos`.
fn back_chars(text: &str, pos: usize, n: usize) -> usize {
    if n == 0 {
        return pos;
    }
    text[..pos].char_indices().rev().nth(n - 1).map_or(0, |(i, _)| i)
}

/// Pushes contiguous byte ranges of `text` (offset by `base`), each at most
/// `budget` characters, covering it exactly.
fn split_rec(text: &str, base: usize, budget: usize, seps: &[Sep], out: &mut Vec<(usize, usize)>) {
    if char_len(text) <= budget {
        out.push((base, base + text.len()));
        return;
    }
    let Some((level, pieces)) = seps
        .iter()
        .enumerate()
        .map(|(i, &s)| (i, split_after(text, s, budget)))
        .find(|(_, p)| p.len() > 1)
    else {
        out.push((base, base + text.len()));
        return;
    };

    // Merge small neighbours greedily; an oversized piece flushes the
    // accumulator and is split further on finer separators.
    let mut acc: Option<(usize, usize, usize)> = None; // (start, end, chars)
    for (s, e) in pieces {
        let n = char_len(&text[s..e]);
        if n > budget {
            if let Some((a, b, _)) = acc.take() {
                out.push((base + a, base + b));
            }
            split_rec(&text[s..e], base + s, budget, &seps[level + 1..], out);
            continue;
        }
        acc = match acc {
            Some((a, _, c)) if c + n <= budget => Some((a, e, c + n)),
            Some((a, b, _)) => {
                out.push((base + a, base + b));
                Some((s, e, n))
            }
            None => Some((s, e, n)),
        };
    }
    if let Some((a, b, _)) = acc {
        out.push((base + a, base + b));
    }
}

/// Splits so that every piece but the last ends right after a separator.
fn split_after(text: &str, sep: Sep, budget: usize) -> Vec<(usize, usize)> {
    let mut cuts = Vec::new();
    match sep {
        Sep::Lit(lit) => cuts.extend(text.match_indices(lit).map(|(i, m)| i + m.len())),
        Sep::SentenceEnd => {
            let b = text.as_bytes();
            cuts.extend((1..b.len()).filter(|&i| b[i] == b' ' && matches!(b[i - 1], b'.' | b'!' | b'?')).map(|i| i + 1));
        }
        Sep::Char => {
            // Runs of `budget` characters; merging single characters would
            // produce the same ranges.
            cuts.extend(text.char_indices().map(|(i, _)| i).skip(budget).step_by(budget));
        }
    }
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut start = 0;
    for c in cuts {
        if c > start && c < text.len() {
            out.push((start, c));
            start = c;
        }
    }
    out.push((start, text.len()));
    out
}
