//! Byte-level BPE on prompt text and candidate answers.
//!
//! cargo run --example tokenize -- "Yesterday, Alice and Bob did not"

use sva_circuits::model::Tokenizer;

fn main() {
    let tok = Tokenizer::gpt2();
    let text = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "Surprisingly, Alice and Bob".to_string());
    let ids = tok.encode(&text);
    println!("{text:?} -> {} tokens", ids.len());
    for &id in ids.ids() {
        println!("  {id:>6}  {:?}", tok.token_label(id));
    }
    for answer in [" walks", " walk", " walked", " went", " goes"] {
        match tok.single_token(answer) {
            Ok(id) => println!("{answer:?} is one token ({id})"),
            Err(e) => println!("{answer:?}: {e}"),
        }
    }
    assert_eq!(tok.decode(ids.ids()), text);
}
