use serde::{Deserialize, Serialize};

use super::PolicyError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub clues: String,
    pub answer: String,
}

/// The five parts wrapped around the clues when prompting a generative model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptTemplate {
    pub role_preamble: String,
    pub reasoning_instruction: String,
    pub penalty_clause: String,
    pub few_shot_example: FewShotExample,
    pub output_format_instruction: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            role_preamble: "You are a science prodigy competing in a live science and maths quiz. \
Answer riddles in biology, chemistry, physics and mathematics like an expert."
                .into(),
            reasoning_instruction: "Reason through the clues one at a time before settling on an answer.".into(),
            penalty_clause: "Your answer must be a single word or short phrase. \
Long or off-topic answers are penalized."
                .into(),
            few_shot_example: FewShotExample {
                clues: "Clue 1: I am a colourless liquid at room temperature. \
Clue 2: I am made of two hydrogen atoms and one oxygen atom. Who am I?"
                    .into(),
                answer: "{\"answer\": \"water\"}".into(),
            },
            output_format_instruction: "Respond only with JSON of the form {\"answer\": \"<answer>\"}.".into(),
        }
    }
}

impl PromptTemplate {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let fields = [
            ("role_preamble", &self.role_preamble),
            ("reasoning_instruction", &self.reasoning_instruction),
            ("penalty_clause", &self.penalty_clause),
            ("few_shot_example.clues", &self.few_shot_example.clues),
            ("few_shot_example.answer", &self.few_shot_example.answer),
            ("output_format_instruction", &self.output_format_instruction),
        ];
        match fields.iter().find(|(_, v)| v.trim().is_empty()) {
            Some((name, _)) => Err(PolicyError::Template(format!("{name} is empty"))),
            None => Ok(()),
        }
    }
}

/// Assembles preamble, reasoning instruction, penalty, example, numbered
/// clues and output format, in that order.
pub fn build_prompt<S: AsRef<str>>(clues: &[S], template: &PromptTemplate) -> Result<String, PolicyError> {
    if clues.is_empty() {
        return Err(PolicyError::NoInput);
    }
    template.validate()?;
    let mut out = String::new();
    for part in [&template.role_preamble, &template.reasoning_instruction, &template.penalty_clause] {
        out.push_str(part.trim());
        out.push_str("\n\n");
    }
    out.push_str("Example riddle:\n");
    out.push_str(template.few_shot_example.clues.trim());
    out.push_str("\nExample answer: ");
    out.push_str(template.few_shot_example.answer.trim());
    out.push_str("\n\nRiddle:\n");
    for (i, clue) in clues.iter().enumerate() {
        out.push_str(&format!("Clue {}: {}\n", i + 1, clue.as_ref().trim()));
    }
    out.push('\n');
    out.push_str(template.output_format_instruction.trim());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const POLARIZATION: [&str; 5] = [
        "I am a property of a periodic propagating disturbance.",
        "Therefore, I am a property of a wave.",
        "I describe a relationship that can exist between particle displacement and wave propagation direction in a mechanical wave.",
        "I am only applicable to waves for which displacement is perpendicular to the direction of wave propagation.",
        "I am that property of an electromagnetic wave which is demonstrated using a polaroid film.",
    ];

    #[test]
    fn parts_appear_in_order() {
        let t = PromptTemplate::default();
        let p = build_prompt(&["i am a property of a wave"], &t).unwrap();
        let positions: Vec<usize> = [
            t.role_preamble.as_str(),
            t.reasoning_instruction.as_str(),
            t.penalty_clause.as_str(),
            t.few_shot_example.clues.as_str(),
            t.few_shot_example.answer.as_str(),
            "i am a property of a wave",
            t.output_format_instruction.as_str(),
        ]
        .iter()
        .map(|part| p.find(part).unwrap_or_else(|| panic!("missing {part}")))
        .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]), "{positions:?}");
    }

    #[test]
    fn five_numbered_clues() {
        let p = build_prompt(&POLARIZATION, &PromptTemplate::default()).unwrap();
        for i in 1..=5 {
            assert!(p.contains(&format!("Clue {i}: {}", POLARIZATION[i - 1])));
        }
        assert!(!p.contains("Clue 6:"));
    }

    #[test]
    fn empty_part_or_input_rejected() {
        let t = PromptTemplate { penalty_clause: " ".into(), ..Default::default() };
        assert!(matches!(build_prompt(&["x"], &t), Err(PolicyError::Template(_))));
        assert_eq!(build_prompt::<&str>(&[], &PromptTemplate::default()), Err(PolicyError::NoInput));
    }
}
