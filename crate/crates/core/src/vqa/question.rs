use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Vocabulary, VqaError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    MemberPresent,
    DamagePresent,
    DamageOnMember,
    AnyDamageOnMember,
    WhatDamageOnMember,
    WhatDamageInImage,
    WhichMemberHasDamage,
}

impl TemplateId {
    pub const ALL: [TemplateId; 7] = [
        TemplateId::MemberPresent,
        TemplateId::DamagePresent,
        TemplateId::DamageOnMember,
        TemplateId::AnyDamageOnMember,
        TemplateId::WhatDamageOnMember,
        TemplateId::WhatDamageInImage,
        TemplateId::WhichMemberHasDamage,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::MemberPresent => "member_present",
            TemplateId::DamagePresent => "damage_present",
            TemplateId::DamageOnMember => "damage_on_member",
            TemplateId::AnyDamageOnMember => "any_damage_on_member",
            TemplateId::WhatDamageOnMember => "what_damage_on_member",
            TemplateId::WhatDamageInImage => "what_damage_in_image",
            TemplateId::WhichMemberHasDamage => "which_member_has_damage",
        }
    }

    /// The English pattern with `{member}` / `{damage}` placeholders.
    pub fn pattern(self) -> &'static str {
        match self {
            TemplateId::MemberPresent => "Is the {member} in the image?",
            TemplateId::DamagePresent => "Is there {damage} in the image?",
            TemplateId::DamageOnMember => "Is there {damage} on the {member}?",
            TemplateId::AnyDamageOnMember => "Is there damage on the {member}?",
            TemplateId::WhatDamageOnMember => "What kind of damage has occurred to the {member}?",
            TemplateId::WhatDamageInImage => "What kind of damage is occurring in the image?",
            TemplateId::WhichMemberHasDamage => "What is the member that has {damage}?",
        }
    }

    pub fn needs_member(self) -> bool {
        self.pattern().contains("{member}")
    }

    pub fn needs_damage(self) -> bool {
        self.pattern().contains("{damage}")
    }

    /// Whether the expected answer is yes/no rather than a name.
    pub fn is_yes_no(self) -> bool {
        self.pattern().starts_with("Is ")
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = VqaError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| VqaError::UnknownTemplate(s.to_string()))
    }
}

/// Slot values for a template.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Slots {
    pub member: Option<String>,
    pub damage: Option<String>,
}

impl Slots {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn member(name: impl Into<String>) -> Self {
        Self {
            member: Some(name.into()),
            damage: None,
        }
    }

    pub fn damage(name: impl Into<String>) -> Self {
        Self {
            member: None,
            damage: Some(name.into()),
        }
    }

    pub fn both(damage: impl Into<String>, member: impl Into<String>) -> Self {
        Self {
            member: Some(member.into()),
            damage: Some(damage.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Question {
    pub template_id: TemplateId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub member: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damage: Option<String>,
    pub text: String,
}

/// Renders a template. Slots the template does not use are dropped.
pub fn render_question(template_id: TemplateId, slots: &Slots) -> Result<Question, VqaError> {
    let missing = |slot| VqaError::MissingSlot {
        template: template_id.as_str(),
        slot,
    };
    let member = if template_id.needs_member() {
        Some(slots.member.clone().ok_or(missing("member"))?)
    } else {
        None
    };
    let damage = if template_id.needs_damage() {
        Some(slots.damage.clone().ok_or(missing("damage"))?)
    } else {
        None
    };
    let mut text = template_id.pattern().to_string();
    if let Some(m) = &member {
        text = text.replace("{member}", m);
    }
    if let Some(d) = &damage {
        text = text.replace("{damage}", d);
    }
    Ok(Question {
        template_id,
        member,
        damage,
        text,
    })
}

impl Question {
    /// Renders a template by name.
    pub fn render(template: &str, slots: &Slots) -> Result<Question, VqaError> {
        render_question(template.parse()?, slots)
    }

    /// Recovers template and slots from rendered text. Slot values must be
    /// vocabulary names.
    pub fn parse(text: &str, vocab: &Vocabulary) -> Option<Question> {
        let text = text.trim();
        for template in TemplateId::ALL {
            let pattern = template.pattern();
            let candidates: Vec<Slots> = match (template.needs_member(), template.needs_damage()) {
                (false, false) => (text == pattern).then(Slots::none).into_iter().collect(),
                (true, false) => single_slot(text, pattern, "{member}")
                    .into_iter()
                    .map(Slots::member)
                    .collect(),
                (false, true) => single_slot(text, pattern, "{damage}")
                    .into_iter()
                    .map(Slots::damage)
                    .collect(),
                (true, true) => damage_then_member(text, pattern),
            };
            for slots in candidates {
                let member_ok = slots
                    .member
                    .as_deref()
                    .is_none_or(|m| vocab.member_rank(m).is_some());
                let damage_ok = slots
                    .damage
                    .as_deref()
                    .is_none_or(|d| vocab.damage_rank(d).is_some());
                if member_ok && damage_ok {
                    return render_question(template, &slots).ok();
                }
            }
        }
        None
    }
}

fn single_slot(text: &str, pattern: &str, placeholder: &str) -> Option<String> {
    let (prefix, suffix) = pattern.split_once(placeholder)?;
    let inner = text.strip_prefix(prefix)?.strip_suffix(suffix)?;
    (!inner.is_empty()).then(|| inner.to_string())
}

/// "Is there {damage} on the {member}?" with every possible split point.
fn damage_then_member(text: &str, pattern: &str) -> Vec<Slots> {
    let (prefix, rest) = pattern.split_once("{damage}").expect("pattern has damage");
    let (middle, suffix) = rest.split_once("{member}").expect("pattern has member");
    let Some(inner) = text
        .strip_prefix(prefix)
        .and_then(|t| t.strip_suffix(suffix))
    else {
        return Vec::new();
    };
    inner
        .match_indices(middle)
        .map(|(i, _)| Slots::both(&inner[..i], &inner[i + middle.len()..]))
        .filter(|s| s.damage.as_deref() != Some("") && s.member.as_deref() != Some(""))
        .collect()
}
