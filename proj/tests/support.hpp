#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ckpk/core.hpp"
#include "ckpk/datagen.hpp"
#include "ckpk/llm.hpp"

namespace ckpk::test {

namespace fs = std::filesystem;

// Words carry a topic-specific prefix so two topics never share a token.
inline std::string pseudo_word(std::mt19937_64& rng, const std::string& prefix) {
  static constexpr char kLetters[] = "bcdfghjklmnprstvz";
  static constexpr char kVowels[] = "aeiou";
  std::string w = prefix;
  for (int i = 0; i < 3; ++i) {
    w += kLetters[rng() % (sizeof(kLetters) - 1)];
    w += kVowels[rng() % (sizeof(kVowels) - 1)];
  }
  return w;
}

inline std::string pseudo_sentence(std::mt19937_64& rng, const std::string& prefix, std::size_t words = 6) {
  std::string s;
  for (std::size_t i = 0; i < words; ++i) {
    auto w = pseudo_word(rng, prefix);
    if (i == 0) w[0] = static_cast<char>(w[0] - 'a' + 'A');
    s += (i ? " " : "") + w;
  }
  return s + ".";
}

inline datagen::TopicSource synthetic_topic(const std::string& name, Lang lang, std::size_t pool,
                                            std::uint64_t seed, bool with_counterfactuals = true) {
  std::mt19937_64 rng(seed);
  std::string prefix;
  for (char ch : name) {
    if (std::isalpha(static_cast<unsigned char>(ch))) prefix += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  datagen::TopicSource t;
  t.topic = name;
  t.lang = lang;
  for (std::size_t i = 0; i < pool; ++i) t.atomic_pool.push_back(pseudo_sentence(rng, prefix));
  if (with_counterfactuals) {
    std::vector<std::string> cf;
    for (std::size_t i = 0; i < pool; ++i) cf.push_back(pseudo_sentence(rng, prefix + "x"));
    t.counterfactual_pool = cf;
    t.counterfactuals_verified = true;
  }
  return t;
}

inline std::string topic_name(std::size_t i) {
  std::string s = "Topic ";
  do {
    s += static_cast<char>('a' + i % 26);
    i /= 26;
  } while (i);
  return s;
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("ckpk-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& p) const { return path_ / p; }

 private:
  fs::path path_;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write(const fs::path& p, const std::string& content) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
}

/// Pre-atomized article files for `n` synthetic topics.
inline void write_articles(const fs::path& dir, std::size_t n, std::size_t pool, const std::string& lang = "en") {
  for (std::size_t i = 0; i < n; ++i) {
    auto t = synthetic_topic(topic_name(i), Lang::parse(lang), pool, 1000 + i, false);
    auto name = t.topic;
    std::replace(name.begin(), name.end(), ' ', '_');
    std::string body;
    for (const auto& s : t.atomic_pool) body += s + "\n";
    write(dir / (name + "." + lang + ".atoms"), body);
  }
}

/// Replies from a fixed script, one per call; records prompts.
class ScriptedGenerator : public llm::TextGenerator {
 public:
  explicit ScriptedGenerator(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  std::string generate(const std::string& prompt, const GenerationParams& params) override {
    prompts.push_back(prompt);
    params_seen.push_back(params);
    if (next_ >= replies_.size()) return replies_.empty() ? std::string{} : replies_.back();
    return replies_[next_++];
  }
  std::string model_id() const override { return "scripted"; }

  std::vector<std::string> prompts;
  std::vector<GenerationParams> params_seen;

 private:
  std::vector<std::string> replies_;
  std::size_t next_ = 0;
};

}  // namespace ckpk::test
