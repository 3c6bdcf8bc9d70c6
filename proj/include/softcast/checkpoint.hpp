#pragma once

// Checkpoint container: a plain-text header followed by the tensors as
// row-major little-endian float32.
//
//   softcast-checkpoint 1
//   V 32
//   ...
//   tensor tok_emb 2 32 32
//   ...
//   data
//   <raw bytes, tensors in header order>

#include <string>

#include "softcast/model.hpp"
#include "softcast/quantizer.hpp"

namespace softcast {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams<float> params;
  TokenSpec spec;
  GlobalRanges ranges;
  int history = 0;  // T the model was trained with
  int horizon = 0;  // L the model was trained with
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
/// Throws ParseError (with header line) or ValidationError on malformed content.
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace softcast
