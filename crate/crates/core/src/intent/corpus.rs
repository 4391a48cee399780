//! Bundled labeled utterance corpus: 50 utterances per intent, expanded
//! deterministically from templates. Classes share function words on
//! purpose (several begin with "what"); the discriminative signal lives in
//! content tokens, which is what the tf-idf weighting should surface.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{IntentLabel, Utterance, N_INTENTS};

pub const PER_CLASS: usize = 50;

/// Expand each pattern: a literal pattern emits itself, a pattern holding
/// "{}" emits one utterance per filler. Truncated to `want`; panics if the
/// templates cannot cover it, since the corpus size is part of the
/// contract.
fn expand(patterns: &[&str], fillers: &[&str], want: usize) -> Vec<String> {
    let mut out = Vec::new();
    for p in patterns {
        if p.contains("{}") {
            for f in fillers {
                out.push(p.replace("{}", f));
            }
        } else {
            out.push((*p).to_string());
        }
    }
    assert!(out.len() >= want, "templates expand to {} < {want} utterances", out.len());
    out.truncate(want);
    out
}

fn device_control() -> Vec<String> {
    let patterns = [
        "take a photo",
        "take a picture",
        "snap a photo of this",
        "capture a picture",
        "take another photo",
        "raise the volume",
        "lower the volume",
        "turn the volume up",
        "turn the volume down",
        "turn up the volume a little",
        "turn down the volume a little",
        "stop listening",
        "stop recording now",
        "pause the music",
        "pause playback",
        "resume playback",
        "mute the speaker",
        "unmute the speaker",
        "turn off the microphone",
        "turn on the microphone",
        "check the battery level",
        "how much battery is left",
        "restart the device",
        "power off the device",
        "enable the camera",
        "disable the camera",
        "start recording audio",
        "set volume to maximum",
        "set volume to minimum",
        "lower the playback volume",
        "raise the playback volume",
        "skip the current track",
        "play the previous track",
        "stop the playback now",
        "put the device to sleep",
        "wake the device up",
        "turn down the brightness",
        "take a quick photo",
        "play the next track",
        "snap a picture please",
        "turn the camera off",
        "cancel the current recording",
        "begin a new recording",
        "end the recording session",
        "skip to the next track",
        "increase the speaker volume",
        "decrease the speaker volume",
        "toggle the mute switch",
        "shut down the earpiece",
        "reboot the earpiece now",
    ];
    expand(&patterns, &[], PER_CLASS)
}

fn visual_query() -> Vec<String> {
    let patterns = [
        "what's on this table?",
        "what is on this table",
        "what am i looking at",
        "what do you see in front of you",
        "describe what you see",
        "describe the scene in front of me",
        "what's in front of me",
        "what is this object",
        "what is this thing i'm holding",
        "what color is this {}",
        "read the text on this {}",
        "is there a cup on the table",
        "is there anything on the desk",
        "what objects are on the shelf",
        "what's on the counter over there",
        "count the objects on the table",
        "what brand is this bottle",
        "does this shirt match these pants",
        "what does this sign say",
        "what does this label say",
        "identify the object in front of me",
        "tell me what you can see",
        "what food is on this plate",
        "what's written on the whiteboard",
        "look at this and describe it",
        "what kind of plant is this",
        "what animal is that over there",
        "do you see a door in this room",
        "what is sitting on the chair",
        "describe the room i'm in",
        "what's hanging on the wall",
        "is the light on in this room",
        "what vegetables are in this bowl",
        "check what's on my desk",
        "what tools are on the bench",
        "what is lying on the floor",
        "see anything interesting here",
        "what's inside this box",
        "read me the menu board",
        "what page is this book open to",
    ];
    let fillers = ["cup", "shirt", "box", "chair", "mug", "folder", "bag", "jacket", "notebook", "pen"];
    expand(&patterns, &fillers, PER_CLASS)
}

fn general_question() -> Vec<String> {
    let patterns = [
        "what is the capital of {}",
        "how tall is mount everest",
        "how tall is the eiffel tower",
        "how far is the moon from earth",
        "how far is mars from the sun",
        "who wrote hamlet",
        "who wrote the odyssey",
        "who painted the mona lisa",
        "who invented the telephone",
        "who discovered penicillin",
        "when did the first moon landing happen",
        "when was the printing press invented",
        "when does daylight saving time end",
        "what year did the berlin wall fall",
        "how many continents are on earth",
        "how many bones are in the human body",
        "how many planets are in the solar system",
        "what is the speed of light",
        "what is the boiling point of water",
        "what is the largest ocean on earth",
        "what is the longest river in the world",
        "what is the population of india",
        "what language do they speak in brazil",
        "what currency is used in japan",
        "how deep is the mariana trench",
        "how old is the universe",
        "how hot is the surface of the sun",
        "why is the sky blue",
        "why do leaves change color in autumn",
        "how do airplanes stay in the air",
        "how does the sun produce energy",
        "why does thunder follow lightning",
        "what is the tallest mountain in africa",
        "which country has the most people",
        "which planet is closest to the sun",
        "when did world war two end",
        "what is the chemical symbol for gold",
        "how long is a marathon",
        "what is the square root of two",
        "how fast can a cheetah run",
        "what is the freezing point of water",
    ];
    let fillers = ["france", "japan", "brazil", "kenya", "canada", "norway", "egypt", "peru", "vietnam", "portugal"];
    expand(&patterns, &fillers, PER_CLASS)
}

fn conversational() -> Vec<String> {
    let patterns = [
        "hey how are you",
        "how are you doing today",
        "good morning",
        "good evening",
        "good night sleep well",
        "hello there",
        "hi nice to meet you",
        "thanks a lot",
        "thank you so much",
        "that was really helpful",
        "that's so funny",
        "tell me a joke",
        "tell me another joke",
        "tell me something interesting",
        "tell me a fun story",
        "i'm feeling great today",
        "i'm a bit tired today",
        "i had a long day at work",
        "hey what's up with you",
        "how's it going",
        "it's been ages hello again",
        "have a good day",
        "see you later",
        "talk to you tomorrow",
        "you're pretty clever",
        "you make me laugh",
        "i like chatting with you",
        "let's chat for a while",
        "keep me company for a bit",
        "sing me a song",
        "say something nice",
        "give me a compliment",
        "i'm bored entertain me",
        "guess how my day went",
        "you won't believe my day",
        "my weekend was lovely",
        "the weather felt nice today",
        "i just got back from a walk",
        "dinner was delicious tonight",
        "i can't wait for the holidays",
        "wish me luck for tomorrow",
        "congratulate me i passed my exam",
        "cheer me up please",
        "good to hear your voice",
        "are you there",
        "hi there just saying hello",
        "nothing much just relaxing",
        "sorry i was away for a while",
        "it's been a quiet afternoon",
        "hope you're doing well",
    ];
    expand(&patterns, &[], PER_CLASS)
}

/// The full 200-utterance corpus, 50 per class, in a fixed order.
pub fn bundled_corpus() -> Vec<Utterance> {
    let mut out = Vec::with_capacity(N_INTENTS * PER_CLASS);
    let classes = [
        (IntentLabel::DeviceControl, device_control()),
        (IntentLabel::VisualQuery, visual_query()),
        (IntentLabel::GeneralQuestion, general_question()),
        (IntentLabel::Conversational, conversational()),
    ];
    for (label, texts) in classes {
        for text in texts {
            out.push(Utterance { text, label });
        }
    }
    out
}

/// Stratified seeded split: the same fraction is held out from every
/// class, so a small held-out set still covers all four labels.
pub fn split_corpus(
    corpus: &[Utterance],
    held_out_fraction: f64,
    seed: u64,
) -> (Vec<Utterance>, Vec<Utterance>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut held = Vec::new();
    for label in IntentLabel::ALL {
        let mut members: Vec<&Utterance> = corpus.iter().filter(|u| u.label == label).collect();
        members.shuffle(&mut rng);
        let n_held = ((members.len() as f64) * held_out_fraction).round() as usize;
        for (i, u) in members.into_iter().enumerate() {
            if i < n_held {
                held.push(u.clone());
            } else {
                train.push(u.clone());
            }
        }
    }
    (train, held)
}
