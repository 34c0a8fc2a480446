#pragma once

#include <string>

#include "takead/diffnum/checkpoint.hpp"
#include "takead/policy/network.hpp"

namespace takead::policy {

inline constexpr const char* kVocabHashKey = "vocab_hash";

inline diffnum::CheckpointMeta policy_meta(const Policy& p) {
  const auto& c = p.config();
  return {{kVocabHashKey, hex64(p.vocabulary().hash())},
          {"k", std::to_string(p.k())},
          {"embed", std::to_string(c.embed)},
          {"hidden", std::to_string(c.hidden)},
          {"max_agents", std::to_string(c.scene.max_agents)},
          {"map_tokens", std::to_string(c.scene.map_tokens)}};
}

inline std::string serialize_policy(const Policy& p) { return diffnum::serialize_parameters(p.params(), policy_meta(p)); }

inline void save_policy(const std::string& path, const Policy& p) {
  diffnum::save_checkpoint(path, p.params(), policy_meta(p));
}

// Hash of the parameters plus the vocabulary they were trained against.
inline std::uint64_t policy_hash(const Policy& p) {
  const std::string bytes = serialize_policy(p);
  return fnv1a(bytes.data(), bytes.size());
}

// Rebuilds a policy for `vocab` and `cfg`, then loads the weights. The
// checkpoint must have been trained against the same vocabulary.
inline Policy load_policy(const std::string& path, const TrajectoryVocabulary& vocab, const PolicyConfig& cfg,
                          const ControlVocabulary& cvocab = {}) {
  Policy p(cfg, vocab, cvocab);
  const auto meta = diffnum::load_checkpoint(path, p.params());
  const auto it = meta.find(kVocabHashKey);
  if (it == meta.end()) throw diffnum::CheckpointError(path + ": missing vocabulary hash");
  if (it->second != hex64(vocab.hash()))
    throw diffnum::CheckpointError(path + ": vocabulary hash mismatch (checkpoint " + it->second + ", vocabulary " +
                                   hex64(vocab.hash()) + ")");
  return p;
}

}  // namespace takead::policy
