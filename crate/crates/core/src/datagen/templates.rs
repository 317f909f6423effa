//! Template banks for synthetic dialog text.

use rand::seq::IndexedRandom;
use rand::Rng;

pub(crate) const USER_OPEN: &[&str] = &[
    "Hi! I've been thinking about {e} lately.",
    "Hello, do you know {e}?",
    "I watched something connected to {e} recently.",
    "Hey, {e} has been on my mind.",
];
pub(crate) const USER_OPEN_BLANK: &[&str] = &["Hi, I'm looking for something to watch.", "Hello! Any ideas for tonight?"];
pub(crate) const USER_ECHO: &[&str] = &[
    "{e} sounds interesting.",
    "Oh, I know {e}.",
    "Tell me more about {e}.",
    "I do like {e}.",
    "{e}? That rings a bell.",
];
pub(crate) const USER_CHATTER: &[&str] = &[
    "By the way, I also enjoyed {e}.",
    "My friend keeps talking about {e}.",
    "I read something about {e} yesterday.",
];
pub(crate) const USER_REQUEST: &[&str] = &["Can you recommend a movie?", "What should I watch next?", "Any movie you would suggest?"];
pub(crate) const USER_ACCEPT: &[&str] = &["Great, I'll watch {e}!", "{e} it is, thanks!"];
pub(crate) const USER_REJECT: &[&str] = &["I'm not in the mood for {e}.", "Hmm, {e} is not really my thing."];
pub(crate) const AGENT_GROUND: &[&str] = &[
    "Speaking of {p}, what about {e}?",
    "Have you heard of {e}?",
    "If you like {p}, you may enjoy {e}.",
    "Let's talk about {e}.",
];
pub(crate) const AGENT_RECOMMEND: &[&str] = &["I recommend {e}.", "You should watch {e}.", "How about {e}? I think you will love it."];

pub(crate) fn fill(bank: &[&str], rng: &mut impl Rng, e: &str, p: &str) -> String {
    bank.choose(rng).expect("non-empty bank").replace("{e}", e).replace("{p}", p)
}
