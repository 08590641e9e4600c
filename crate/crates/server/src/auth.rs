//! Bearer-token sessions for the static users listed in the config.

use std::collections::HashMap;

use chrono::{DateTime, Utc};
use clinanno_core::{Actor, ActorId, Role};
use serde::Serialize;

use crate::config::UserConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Session {
    pub actor: ActorId,
    pub role: Role,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expires: Option<DateTime<Utc>>,
}

impl Session {
    pub fn as_actor(&self) -> Actor {
        Actor::new(self.actor.as_str(), self.role)
    }

    pub fn is(&self, role: Role) -> bool {
        self.role == role
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuthFailure {
    Missing,
    Unknown,
    Expired,
}

pub struct Users {
    by_token: HashMap<String, UserConfig>,
}

impl Users {
    pub fn new(users: &[UserConfig]) -> Self {
        Users {
            by_token: users.iter().map(|u| (u.token.clone(), u.clone())).collect(),
        }
    }

    pub fn actors(&self, role: Role) -> Vec<Actor> {
        let mut out: Vec<Actor> = self
            .by_token
            .values()
            .filter(|u| u.role == role)
            .map(|u| {
                let mut a = Actor::new(u.id.as_str(), u.role);
                if let Some(n) = &u.name {
                    a.name = n.clone();
                }
                a
            })
            .collect();
        out.sort_by(|a, b| a.id.cmp(&b.id));
        out
    }

    pub fn find(&self, id: &ActorId) -> Option<&UserConfig> {
        self.by_token.values().find(|u| u.id == id.as_str())
    }

    /// Resolves an `Authorization` header value at time `now`.
    pub fn authenticate(&self, header: Option<&str>, now: DateTime<Utc>) -> Result<Session, AuthFailure> {
        let token = header
            .and_then(|h| h.strip_prefix("Bearer "))
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .ok_or(AuthFailure::Missing)?;
        let user = self.by_token.get(token).ok_or(AuthFailure::Unknown)?;
        if user.expires.is_some_and(|e| e <= now) {
            return Err(AuthFailure::Expired);
        }
        Ok(Session {
            actor: ActorId::new(user.id.as_str()),
            role: user.role,
            expires: user.expires,
        })
    }
}
