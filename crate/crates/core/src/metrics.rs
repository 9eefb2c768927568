//! Character error rate.

/// Unit-cost Levenshtein distance over Unicode scalar values.
pub fn edit_distance(reference: &str, hypothesis: &str) -> usize {
    let a: Vec<char> = reference.chars().collect();
    let b: Vec<char> = hypothesis.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, &ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let best = (row[j] + 1)
                .min(row[j + 1] + 1)
                .min(diag + usize::from(ca != cb));
            diag = row[j + 1];
            row[j + 1] = best;
        }
    }
    row[b.len()]
}

/// Per-utterance scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub reference: String,
    pub hypothesis: String,
    pub edits: usize,
    /// `edits / max(1, reference length)`.
    pub cer: f64,
    /// Set when the reference is empty but the hypothesis is not; the rate is
    /// then the hypothesis length over 1.
    pub empty_reference: bool,
}

impl EvalResult {
    pub fn score(reference: impl Into<String>, hypothesis: impl Into<String>) -> Self {
        let reference = reference.into();
        let hypothesis = hypothesis.into();
        let edits = edit_distance(&reference, &hypothesis);
        let ref_len = reference.chars().count();
        Self {
            cer: edits as f64 / ref_len.max(1) as f64,
            empty_reference: ref_len == 0 && edits > 0,
            reference,
            hypothesis,
            edits,
        }
    }

    pub fn reference_len(&self) -> usize {
        self.reference.chars().count()
    }
}

pub fn cer(reference: &str, hypothesis: &str) -> f64 {
    EvalResult::score(reference, hypothesis).cer
}

/// Corpus-level rate: total edits over total reference characters.
pub fn aggregate_cer(results: &[EvalResult]) -> f64 {
    let edits: usize = results.iter().map(|r| r.edits).sum();
    let chars: usize = results.iter().map(EvalResult::reference_len).sum();
    if chars == 0 {
        if edits == 0 {
            0.0
        } else {
            edits as f64
        }
    } else {
        edits as f64 / chars as f64
    }
}
