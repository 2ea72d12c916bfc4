//! Seeded synthetic riddles and annotations for exercising the harness.
//! None of this is real contest data; generated riddles carry the contest
//! name `synthetic`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{riddle_id, HumanAnnotation, Riddle, RiddleDataset, Subject};

pub const SYNTHETIC_CONTEST: &str = "synthetic";

const OPENERS: [&str; 6] = ["I am", "My", "I describe", "I was", "I am found in", "My value"];
const WORDS: [&str; 32] = [
    "energy", "charge", "membrane", "orbit", "lattice", "gradient", "enzyme", "vector", "field", "protein",
    "equation", "current", "nucleus", "bond", "pressure", "wave", "solution", "matrix", "pigment", "spectrum",
    "ratio", "tissue", "crystal", "function", "isotope", "signal", "volume", "catalyst", "density", "sequence",
    "surface", "mirror",
];
const HEADS: [&str; 16] = [
    "alpha", "beta", "gamma", "delta", "kappa", "lambda", "sigma", "omega", "zircon", "helix", "quasar", "prism",
    "boson", "quark", "axon", "ribose",
];
const TAILS: [&str; 12] = [
    "constant", "law", "effect", "cycle", "number", "principle", "series", "theorem", "reaction", "particle", "limit",
    "acid",
];
const SUBJECTS: [Subject; 4] = [Subject::Biology, Subject::Chemistry, Subject::Physics, Subject::Math];

/// Answer `i` is unique per index and shares no word with the clue vocabulary.
fn answer(i: usize) -> String {
    let base = format!("{} {}", HEADS[i % HEADS.len()], TAILS[(i / HEADS.len()) % TAILS.len()]);
    match i / (HEADS.len() * TAILS.len()) {
        0 => base,
        round => format!("{base} {round}"),
    }
}

/// `n` riddles with 3 to 6 clues each, deterministic in `seed`.
pub fn synthetic_dataset(n: usize, year: i32, seed: u64) -> RiddleDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let riddles = (0..n)
        .map(|i| {
            let n_clues = rng.gen_range(3..=6);
            let clues = (0..n_clues)
                .map(|_| {
                    let len = rng.gen_range(4..=10);
                    let mut words = vec![*OPENERS.choose(&mut rng).expect("nonempty")];
                    words.extend((0..len).map(|_| *WORDS.choose(&mut rng).expect("nonempty")));
                    format!("{}.", words.join(" "))
                })
                .collect();
            Riddle {
                id: riddle_id(year, i + 1),
                year,
                contest: SYNTHETIC_CONTEST.to_owned(),
                subject: Some(SUBJECTS[rng.gen_range(0..SUBJECTS.len())]),
                clues,
                answer: answer(i),
                alt_answers: Vec::new(),
            }
        })
        .collect();
    RiddleDataset::new(riddles, format!("synthetic:{year}:{seed}")).expect("unique generated ids")
}

/// Annotations with exactly `correct` riddles answered correctly.
///
/// Of the rest, about half are answered wrongly and half left unanswered.
/// Clue numbers are drawn uniformly from each riddle's clues.
pub fn synthetic_annotations(dataset: &RiddleDataset, correct: usize, seed: u64) -> Vec<HumanAnnotation> {
    assert!(correct <= dataset.len(), "cannot mark {correct} of {} riddles correct", dataset.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut rng);
    let mut is_correct = vec![false; dataset.len()];
    for &i in &order[..correct] {
        is_correct[i] = true;
    }
    dataset
        .riddles
        .iter()
        .zip(is_correct)
        .map(|(r, ok)| {
            let answered = ok || rng.gen_bool(0.5);
            HumanAnnotation {
                riddle_id: r.id.clone(),
                answered,
                clue_number: answered.then(|| rng.gen_range(1..=r.clues.len() as u32)),
                correct: ok,
            }
        })
        .collect()
}
