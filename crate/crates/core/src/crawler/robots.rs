//! Minimal robots.txt support: User-agent groups with Allow/Disallow path
//! prefixes. Longest matching prefix wins; Allow wins a tie. Wildcards are
//! not interpreted.

#[derive(Debug, Clone, Default)]
pub struct RobotsPolicy {
    /// (allow, path prefix) rules of the applicable group.
    rules: Vec<(bool, String)>,
}

impl RobotsPolicy {
    pub fn allow_all() -> Self {
        RobotsPolicy::default()
    }

    /// Parses robots.txt and keeps the group that best matches `user_agent`:
    /// the group with the longest agent token contained in the user agent,
    /// falling back to the `*` group, falling back to allow-all.
    pub fn parse(content: &str, user_agent: &str) -> Self {
        let ua = user_agent.to_ascii_lowercase();
        // (agent token, rules) per group; a group may name several agents.
        let mut groups: Vec<(Vec<String>, Vec<(bool, String)>)> = Vec::new();
        let mut in_agent_run = false;
        for line in content.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            let Some((key, value)) = line.split_once(':') else {
                continue;
            };
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim();
            match key.as_str() {
                "user-agent" => {
                    if !in_agent_run || groups.is_empty() {
                        groups.push((Vec::new(), Vec::new()));
                    }
                    in_agent_run = true;
                    if let Some(group) = groups.last_mut() {
                        group.0.push(value.to_ascii_lowercase());
                    }
                }
                "allow" | "disallow" => {
                    in_agent_run = false;
                    if value.is_empty() {
                        continue;
                    }
                    if let Some(group) = groups.last_mut() {
                        group.1.push((key == "allow", value.to_string()));
                    }
                }
                _ => {
                    in_agent_run = false;
                }
            }
        }
        let mut best: Option<(usize, &Vec<(bool, String)>)> = None;
        let mut wildcard: Option<&Vec<(bool, String)>> = None;
        for (agents, rules) in &groups {
            for agent in agents {
                if agent == "*" {
                    wildcard.get_or_insert(rules);
                } else if ua.contains(agent.as_str())
                    && best.map_or(true, |(len, _)| agent.len() > len)
                {
                    best = Some((agent.len(), rules));
                }
            }
        }
        let rules = best
            .map(|(_, r)| r)
            .or(wildcard)
            .cloned()
            .unwrap_or_default();
        RobotsPolicy { rules }
    }

    pub fn is_allowed(&self, path: &str) -> bool {
        let mut verdict = true;
        let mut best_len = 0;
        for (allow, prefix) in &self.rules {
            if path.starts_with(prefix.as_str()) {
                let len = prefix.len();
                if len > best_len || (len == best_len && *allow) {
                    best_len = len;
                    verdict = *allow;
                }
            }
        }
        verdict
    }
}
