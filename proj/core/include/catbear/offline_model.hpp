#pragma once

#include "catbear/llm_gateway.hpp"

namespace catbear {

/// Deterministic stand-in for a chat model. Recognizes the synthesis and
/// evaluation prompts by their task tags and answers in the expected format;
/// the emotion is picked from the prompt hash, appraisal levels are the
/// quantized vector of that emotion, and utterances come from a small bank.
/// Anything unrecognized gets a plain sentence.
MockBackend::Responder offline_model_responder();

std::shared_ptr<MockBackend> make_offline_backend();

}  // namespace catbear
