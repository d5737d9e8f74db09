//! Arbitrary-length k-anonymous broadcast over dining-cryptographers rounds.
//!
//! A protocol instance is two DC rounds. The initial round carries, per sender,
//! a random identifier, a message length and (when secured) one sealed seed per
//! group member. The final round carries every announced message at a
//! prefix-sum offset in one compound payload. Secured rounds commit to every
//! slice with Pedersen commitments; foreign reservations are blinded with
//! streams derived from the owner's seeds, so an owner whose message is
//! damaged can prove which peer committed to something other than zero.

pub mod baseline;
pub mod blame;
pub mod crypto;
pub mod dc;
pub mod envelope;
pub mod fault;
pub mod final_round;
pub mod init;
pub mod node;
pub mod state;
pub mod wire;
