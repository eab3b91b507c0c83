//! The 23-register taxonomy used as the search space for laundering goals,
//! with each register's opening template and standard rewrite prompt.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prompt::RewritePrompt;

/// One entry of the register taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Register {
    pub id: u8,
    pub name: &'static str,
    pub abbreviation: &'static str,
}

/// A register's extracted first-sentence template. Placeholders use the
/// bracketed form `[...]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpeningTemplate {
    pub register_id: u8,
    pub template_text: String,
}

impl OpeningTemplate {
    pub fn new(register_id: u8, template_text: impl Into<String>) -> Result<Self> {
        let template_text = template_text.into();
        if template_text.trim().is_empty() {
            return Err(Error::Validation("opening template is empty".into()));
        }
        if !has_placeholder(&template_text) {
            return Err(Error::Validation(format!(
                "opening template for register {register_id} has no [..] placeholder"
            )));
        }
        Ok(OpeningTemplate {
            register_id,
            template_text,
        })
    }
}

pub fn has_placeholder(text: &str) -> bool {
    match (text.find('['), text.rfind(']')) {
        (Some(open), Some(close)) => open < close,
        _ => false,
    }
}

struct Entry {
    id: u8,
    name: &'static str,
    abbreviation: &'static str,
    template: &'static str,
    standard_prompt: &'static str,
}

const CATALOG: &[Entry] = &[
    Entry {
        id: 1,
        name: "lyrical",
        abbreviation: "ly",
        template: "In the heart of [abstract domain], a tale unfolds, where [abstract concept], [abstract detail], [abstract entity], [abstract action].",
        standard_prompt: "Rewrite the text in a lyrical style, ensuring the rhythm flows naturally.",
    },
    Entry {
        id: 2,
        name: "encyclopedia article",
        abbreviation: "en",
        template: "[Subject] is a [type/category] that [provides a description or function], [additional information if applicable].",
        standard_prompt: "Rewrite the text in the style of an encyclopedia entry, maintaining a neutral, authoritative tone, and include at least one date, fact, or reference to give it the appearance of being sourced.",
    },
    Entry {
        id: 3,
        name: "spoken",
        abbreviation: "sp",
        template: "So, let's talk about [TOPIC].",
        standard_prompt: "Rewrite the text in a spoken style, making it sound natural and conversational, and ensure the tone feels engaging and easy to follow for a live audience.",
    },
    Entry {
        id: 4,
        name: "research article",
        abbreviation: "ra",
        template: "This article explores the significance of [subject or topic], a [description or classification], characterized by [notable features or contributions].",
        standard_prompt: "Rewrite the text as an academic research article, structured with sections such as Abstract, Introduction, Method, Results, and Conclusion, and include at least one in-text citation to simulate scholarly referencing.",
    },
    Entry {
        id: 5,
        name: "interview",
        abbreviation: "it",
        template: "Interviewer: Thank you for joining us, [Person/Expert Title]. Can you tell us about [Subject/Topic]?",
        standard_prompt: "Rewrite the text in the form of an interview, ensuring the questions flow naturally and the answers provide clear, engaging explanations for the audience.",
    },
    Entry {
        id: 6,
        name: "description of a thing or person",
        abbreviation: "dtp",
        template: "Introducing [Subject/Entity], a [descriptor] [type/category] [context/detail] renowned for its [property/characteristic].",
        standard_prompt: "Rewrite the text as a descriptive profile of a specific thing or person, using concrete details and attributes, and ending with a short summary sentence that highlights its significance.",
    },
    Entry {
        id: 7,
        name: "interactive discussion",
        abbreviation: "id",
        template: "[Participant 1]: So, have you guys heard about [Topic/Subject]? I recently came across some interesting information about it.",
        standard_prompt: "Rewrite the text as an interactive discussion between two or more participants, ensuring the conversation flows logically, with each speaker's tone and style clearly distinguishable.",
    },
    Entry {
        id: 8,
        name: "FAQ",
        abbreviation: "fi",
        template: "What is [Subject]? [Subject] is a [general category or description] [specific type or detail] [additional information].",
        standard_prompt: "Rewrite the text in the form of a Frequently Asked Questions section, making sure to include at least three question-answer pairs, with the questions phrased from the perspective of a curious reader.",
    },
    Entry {
        id: 9,
        name: "narrative",
        abbreviation: "na",
        template: "Once upon a time, in a [adjective] [type of place] called [place name], there lived a [adjective] [type of character] named [character name].",
        standard_prompt: "Rewrite the text as a storytelling narrative. The story should flow naturally, use simple and engaging language, and be easy for all kinds of listeners to follow.",
    },
    Entry {
        id: 10,
        name: "legal terms & conditions",
        abbreviation: "lt",
        template: "Terms and Conditions Regarding [Subject/Theme].",
        standard_prompt: "Rewrite the text as legal terms and conditions, using formal legal language, and ensure at least one numbered clause is included for clarity.",
    },
    Entry {
        id: 11,
        name: "news report",
        abbreviation: "ne",
        template: "[Event/Topic]: [Description/Significance] [Location/Context] - [Details about the subject, including noteworthy contributions, roles, or milestones].",
        standard_prompt: "Rewrite the text in the style of a news report, ensuring the information is presented objectively and concisely.",
    },
    Entry {
        id: 12,
        name: "opinion",
        abbreviation: "op",
        template: "In my view, [Subject/Entity] represents [significance/impact/legacy] in [field/area], and its influence on [audience/community/context] cannot be overstated.",
        standard_prompt: "Rewrite the text as a personal opinion piece, written in the first person, making sure to clearly express a stance and support it with at least one reason or example.",
    },
    Entry {
        id: 13,
        name: "sports report",
        abbreviation: "sr",
        template: "In a thrilling [event/display/action], [subject/actor] has [verb] [description/impact] in [field/area/genre].",
        standard_prompt: "Rewrite the text as a sports report, ensuring the action is described with dynamic, energetic language that conveys the pace, tension, and excitement of the event.",
    },
    Entry {
        id: 14,
        name: "review",
        abbreviation: "rv",
        template: "[Subject] is a [descriptor] that [verb phrase] [contextual information].",
        standard_prompt: "Rewrite the text as a review, giving it a clear positive or negative stance, and include at least one specific detail or example to justify the evaluation.",
    },
    Entry {
        id: 15,
        name: "narrative blog",
        abbreviation: "nb",
        template: "In the context of [broad category or field], [subject or specific work] has made a significant impact, often leading to [general observation or effect].",
        standard_prompt: "Rewrite the text as a narrative blog post, organized into clear sections with subheadings. Use a tone that is engaging and reflective, blending stories with explanation.",
    },
    Entry {
        id: 16,
        name: "opinion blog",
        abbreviation: "ob",
        template: "When we think of [general category or field], [a notable example or subject] often comes to mind.",
        standard_prompt: "Rewrite the text as an opinion blog post, written in a conversational and persuasive tone, and include at least one personal anecdote or illustrative example to strengthen the argument.",
    },
    Entry {
        id: 17,
        name: "how-to or instructions",
        abbreviation: "hi",
        template: "Step-by-Step Guide to Understanding [Subject]. Step 1: [Initial focus or background]. Learn that [Subject Description].",
        standard_prompt: "Rewrite the text as a step-by-step instructional guide. Break the content into numbered steps, with each step beginning with a clear imperative verb.",
    },
    Entry {
        id: 18,
        name: "denominational religious blog or sermon",
        abbreviation: "rs",
        template: "Beloved congregation, today we gather to reflect upon [individual/concept] that illuminates our lives and encourages us to contemplate our shared journey.",
        standard_prompt: "Rewrite the text as a denominational religious sermon, using a reverent and exhortative tone, and include at least one moral teaching to guide the audience toward reflection or action.",
    },
    Entry {
        id: 19,
        name: "recipe",
        abbreviation: "re",
        template: "Recipe for [General Concept]: [Specific Edition/Style]. Ingredients: [Variable 1], [Variable 2], [Variable 3].",
        standard_prompt: "Rewrite the text as a recipe, introduce the information as sequential steps.",
    },
    Entry {
        id: 20,
        name: "description with intent to sell",
        abbreviation: "ds",
        template: "Introducing [Subject]: a [descriptor] [product/service] designed for [use case]; discover how it [benefit/outcome] for [target user].",
        standard_prompt: "Rewrite the text as a sales description, and be sure to include a clear call-to-action at the end.",
    },
    Entry {
        id: 21,
        name: "informational persuasion",
        abbreviation: "ip",
        template: "In the context of [domain or field], few [types/categories] resonate as profoundly within [subfields] as [specific work/name/entity].",
        standard_prompt: "Rewrite the text to persuade the reader through factual information, making sure to include at least three specific data points or statistics to support the argument.",
    },
    Entry {
        id: 22,
        name: "informational description",
        abbreviation: "in",
        template: "[Entity/Subject] is a [description] in the field of [broader category], specifically within [subcategory/locale].",
        standard_prompt: "Rewrite the text as an informational description, ensuring the tone is neutral and objective, and include at least one definition or clarification to help the reader better understand the subject.",
    },
    Entry {
        id: 23,
        name: "news & opinion blog or editorial",
        abbreviation: "ed",
        template: "When we think of [general category or field], [notable subject] often comes to mind, situating today's discussion of [topic] within [context].",
        standard_prompt: "Rewrite the text in the style of an editorial, making sure to include a clear stance or opinion and a concluding paragraph that calls for action or reflection.",
    },
];

/// The full taxonomy in id order.
pub fn catalog() -> Vec<Register> {
    CATALOG
        .iter()
        .map(|e| Register {
            id: e.id,
            name: e.name,
            abbreviation: e.abbreviation,
        })
        .collect()
}

pub fn by_id(id: u8) -> Option<Register> {
    CATALOG.iter().find(|e| e.id == id).map(|e| Register {
        id: e.id,
        name: e.name,
        abbreviation: e.abbreviation,
    })
}

/// The fixture opening template for a register (the fallback when live
/// extraction fails, and the scripted simulator's canonical answer).
pub fn fixture_template(id: u8) -> Option<OpeningTemplate> {
    CATALOG
        .iter()
        .find(|e| e.id == id)
        .map(|e| OpeningTemplate::new(e.id, e.template).expect("fixture templates are valid"))
}

/// The fixture standard prompt for a register.
pub fn fixture_standard_prompt(id: u8) -> Option<RewritePrompt> {
    CATALOG
        .iter()
        .find(|e| e.id == id)
        .map(|e| RewritePrompt::standard(e.standard_prompt, Some(e.id)))
}

pub fn fixture_standard_prompt_text(id: u8) -> Option<&'static str> {
    CATALOG.iter().find(|e| e.id == id).map(|e| e.standard_prompt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_has_exactly_23_entries_in_id_order() {
        let registers = catalog();
        assert_eq!(registers.len(), 23);
        for (i, r) in registers.iter().enumerate() {
            assert_eq!(r.id as usize, i + 1);
        }
        assert_eq!(registers[0].abbreviation, "ly");
        assert_eq!(registers[0].name, "lyrical");
        assert_eq!(registers[22].abbreviation, "ed");
        assert_eq!(registers[22].name, "news & opinion blog or editorial");
    }

    #[test]
    fn abbreviations_are_unique() {
        let mut abbrs: Vec<_> = catalog().iter().map(|r| r.abbreviation).collect();
        abbrs.sort();
        abbrs.dedup();
        assert_eq!(abbrs.len(), 23);
    }

    #[test]
    fn every_template_has_a_placeholder() {
        for r in catalog() {
            let t = fixture_template(r.id).unwrap();
            assert!(has_placeholder(&t.template_text), "register {}", r.id);
        }
    }

    #[test]
    fn interview_template_matches_fixture_opening() {
        let t = fixture_template(5).unwrap();
        assert!(t.template_text.starts_with("Interviewer: Thank you for joining us"));
    }

    #[test]
    fn lyrical_standard_prompt_follows_the_pattern() {
        let p = fixture_standard_prompt(1).unwrap();
        assert!(p.text.starts_with("Rewrite the text in a lyrical style"));
        assert_eq!(p.generation, 0);
        assert_eq!(p.register_id, Some(1));
    }

    #[test]
    fn template_without_placeholder_is_rejected() {
        assert!(OpeningTemplate::new(1, "no placeholders here").is_err());
    }
}
