use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Clinical role of a team member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    Oncologist,
    Radiologist,
    Nurse,
    Psychologist,
    PatientAdvocate,
    Nutritionist,
    RehabTherapist,
}

impl Role {
    pub const ALL: [Role; 7] = [
        Role::Oncologist,
        Role::Radiologist,
        Role::Nurse,
        Role::Psychologist,
        Role::PatientAdvocate,
        Role::Nutritionist,
        Role::RehabTherapist,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Oncologist => "Oncologist",
            Role::Radiologist => "Radiologist",
            Role::Nurse => "Nurse",
            Role::Psychologist => "Psychologist",
            Role::PatientAdvocate => "PatientAdvocate",
            Role::Nutritionist => "Nutritionist",
            Role::RehabTherapist => "RehabTherapist",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Role::PatientAdvocate => "Patient Advocate",
            Role::RehabTherapist => "Rehabilitation Therapist",
            other => other.as_str(),
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownRole(s.to_string()))
    }
}
