// SPDX-License-Identifier: Apache-2.0

//! Name-keyed lookup for interchangeable strategy implementations.

use crate::error::{Error, Result};

/// Anything registrable exposes a stable lookup name.
pub trait Named {
    fn name(&self) -> &'static str;
}

pub struct Registry<T: ?Sized + Named> {
    kind: &'static str,
    entries: Vec<Box<T>>,
}

impl<T: ?Sized + Named> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: Vec::new(),
        }
    }

    /// Adds `entry`, replacing any earlier entry of the same name.
    pub fn register(&mut self, entry: Box<T>) -> &mut Self {
        self.entries.retain(|e| e.name() != entry.name());
        self.entries.push(entry);
        self
    }

    pub fn get(&self, name: &str) -> Result<&T> {
        self.entries
            .iter()
            .find(|e| e.name() == name)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::UnknownStrategy {
                kind: self.kind,
                name: name.to_string(),
                known: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    trait Greeter: Named {
        fn greet(&self) -> String;
    }

    struct Hello(&'static str);
    impl Named for Hello {
        fn name(&self) -> &'static str {
            self.0
        }
    }
    impl Greeter for Hello {
        fn greet(&self) -> String {
            format!("hello from {}", self.0)
        }
    }

    #[test]
    fn lookup_and_replace() {
        let mut r: Registry<dyn Greeter> = Registry::new("greeter");
        r.register(Box::new(Hello("a"))).register(Box::new(Hello("b")));
        assert_eq!(r.get("b").unwrap().greet(), "hello from b");
        r.register(Box::new(Hello("a")));
        assert_eq!(r.names(), ["b", "a"]);
        let err = r.get("zzz").err().unwrap().to_string();
        assert!(err.contains("zzz") && err.contains("b, a"), "{err}");
    }
}
