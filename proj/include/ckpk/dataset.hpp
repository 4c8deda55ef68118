#pragma once

// Dataset files: article ingestion, TopicSource/ContextWindow JSONL and
// counterfactual review files.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "ckpk/atomize.hpp"
#include "ckpk/core.hpp"
#include "ckpk/datagen.hpp"
#include "ckpk/jsonl.hpp"
#include "ckpk/llm.hpp"

namespace ckpk::pipeline {

namespace fs = std::filesystem;

struct Dataset {
  std::vector<datagen::TopicSource> topics;
  std::vector<ContextWindow> windows;

  const ContextWindow* find_window(const std::string& topic, const Lang& lang, std::size_t size,
                                   Condition condition) const {
    for (const auto& w : windows) {
      if (w.topic == topic && w.lang == lang && w.sentences.size() == size && w.condition == condition) return &w;
    }
    return nullptr;
  }
};

inline Dataset load_dataset(const fs::path& path) {
  Dataset d;
  for (const auto& line : jsonl::read_file(path)) {
    if (line.kind == jsonl::kind::topic_source) {
      d.topics.push_back(line.body.get<datagen::TopicSource>());
    } else if (line.kind == jsonl::kind::context_window) {
      auto w = line.body.get<ContextWindow>();
      auto violations = validate_context_window(w);
      if (!violations.empty()) {
        fail(Errc::schema, path.string() + ": window '" + w.topic + "' size " + std::to_string(w.size) + ": " +
                               violations.front());
      }
      d.windows.push_back(std::move(w));
    } else {
      fail(Errc::schema, path.string() + ": unexpected record kind '" + line.kind + "' in dataset");
    }
  }
  return d;
}

inline void save_dataset(const fs::path& path, const Dataset& d) {
  std::vector<std::string> lines;
  for (const auto& t : d.topics) lines.push_back(jsonl::encode(jsonl::kind::topic_source, t));
  for (const auto& w : d.windows) lines.push_back(jsonl::encode(jsonl::kind::context_window, w));
  jsonl::write_file(path, lines);
}

inline std::string dataset_version(const fs::path& path) { return sha256_hex(jsonl::read_text(path)).substr(0, 16); }

// ---------------------------------------------------------------------------
// Article ingestion

struct ArticleFile {
  fs::path path;
  std::string topic;
  Lang lang;
  bool pre_atomized = false;  // .atoms: one atomic sentence per line
};

inline bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xe ? 3 : (c >> 3) == 0x1e ? 4 : 0;
    if (len == 0 || i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2) return false;
    }
    i += len;
  }
  return true;
}

/// `<Topic_Name>.<lang>.txt` or `<Topic_Name>.<lang>.atoms`; underscores in
/// the topic become spaces.
inline std::optional<ArticleFile> parse_article_name(const fs::path& p) {
  auto ext = p.extension().string();
  if (ext != ".txt" && ext != ".atoms") return std::nullopt;
  auto stem = p.stem().string();  // Topic.lang
  auto dot = stem.rfind('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == stem.size()) {
    fail(Errc::io, p.string() + ": article files must be named <topic>.<lang>" + ext);
  }
  ArticleFile a;
  a.path = p;
  a.topic = stem.substr(0, dot);
  std::replace(a.topic.begin(), a.topic.end(), '_', ' ');
  a.lang = Lang::parse(stem.substr(dot + 1));
  a.pre_atomized = ext == ".atoms";
  return a;
}

inline std::vector<std::string> read_article(const ArticleFile& a, llm::TextGenerator* atomizer, std::size_t limit) {
  std::string content;
  try {
    content = jsonl::read_text(a.path);
  } catch (const Error&) {
    fail(Errc::io, a.path.string() + ": unreadable article file");
  }
  if (!valid_utf8(content)) fail(Errc::io, a.path.string() + ": article is not valid UTF-8");
  if (text::is_blank(content)) fail(Errc::io, a.path.string() + ": article is empty");

  if (a.pre_atomized) {
    std::vector<std::string> out;
    for (const auto& line : text::split_lines(content)) {
      if (!text::is_blank(line)) out.emplace_back(text::trim(line));
    }
    return out;
  }
  if (atomizer) return atomize::atomize_llm(content, a.lang, *atomizer, limit).atomic_sentences;
  return atomize::atomize_fallback(content).atomic_sentences;
}

inline fs::path review_path(const fs::path& dir, const datagen::TopicSource& t) {
  auto name = t.topic;
  std::replace(name.begin(), name.end(), ' ', '_');
  return dir / (name + "." + t.lang.tag() + ".review.json");
}

struct BuildDatasetOptions {
  fs::path article_dir;
  fs::path out;
  std::vector<std::size_t> sizes{kDefaultContextSizes.begin(), kDefaultContextSizes.end()};
  llm::TextGenerator* atomizer = nullptr;  // fallback splitter when null
  std::size_t atomize_limit = prompts::kDefaultAtomizeLimit;
  std::vector<Condition> conditions;       // contradiction windows to add
  std::size_t condition_size = 20;
  std::size_t shuffle_samples = 0;
  std::uint64_t seed = 0;
};

struct BuildDatasetSummary {
  std::size_t topics = 0;
  std::size_t windows = 0;
  std::map<std::string, std::size_t> context_sentences_per_lang;
};

inline BuildDatasetSummary cmd_build_dataset(const BuildDatasetOptions& opt) {
  if (!fs::is_directory(opt.article_dir)) fail(Errc::io, opt.article_dir.string() + " is not a directory");
  std::vector<ArticleFile> files;
  for (const auto& entry : fs::directory_iterator(opt.article_dir)) {
    if (!entry.is_regular_file()) continue;
    if (auto a = parse_article_name(entry.path())) files.push_back(std::move(*a));
  }
  std::sort(files.begin(), files.end(), [](const ArticleFile& a, const ArticleFile& b) {
    return std::tie(a.lang, a.topic) < std::tie(b.lang, b.topic);
  });

  Dataset d;
  BuildDatasetSummary summary;
  const std::size_t max_size = opt.sizes.empty() ? 0 : *std::max_element(opt.sizes.begin(), opt.sizes.end());
  for (const auto& f : files) {
    datagen::TopicSource src;
    src.topic = f.topic;
    src.lang = f.lang;
    src.atomic_pool = read_article(f, opt.atomizer, opt.atomize_limit);

    auto review = review_path(opt.article_dir, src);
    if (fs::exists(review)) {
      auto reviewed = json::parse(jsonl::read_text(review), nullptr, false);
      if (reviewed.is_discarded()) fail(Errc::io, review.string() + ": not valid JSON");
      auto r = reviewed.get<datagen::TopicSource>();
      if (r.atomic_pool != src.atomic_pool) {
        fail(Errc::schema, review.string() + ": review pool no longer matches the article; regenerate it");
      }
      src.counterfactual_pool = r.counterfactual_pool;
      src.counterfactuals_verified = r.counterfactuals_verified;
    }

    for (auto& w : datagen::build_context_windows(src, opt.sizes)) d.windows.push_back(std::move(w));
    for (auto c : opt.conditions) d.windows.push_back(datagen::build_condition(src, opt.condition_size, c));
    summary.context_sentences_per_lang[src.lang.tag()] += std::min(max_size, src.atomic_pool.size());
    d.topics.push_back(std::move(src));
  }

  if (opt.shuffle_samples > 0) {
    auto base = d.windows;
    for (auto i : datagen::sample_for_shuffle(base, opt.shuffle_samples, opt.seed)) {
      d.windows.push_back(datagen::shuffle_window(base[i], opt.seed + i));
    }
  }

  summary.topics = d.topics.size();
  summary.windows = d.windows.size();
  save_dataset(opt.out, d);
  return summary;
}

/// Writes one unverified review file per topic next to the articles.
inline std::vector<fs::path> cmd_propose_counterfactuals(const fs::path& dataset, llm::TextGenerator& gen,
                                                         const fs::path& review_dir) {
  std::vector<fs::path> written;
  for (const auto& t : load_dataset(dataset).topics) {
    auto proposed = datagen::propose_counterfactuals(t, gen);
    auto path = review_path(review_dir, proposed);
    jsonl::write_text(path, json(proposed).dump(2) + "\n");
    written.push_back(path);
  }
  return written;
}

}  // namespace ckpk::pipeline
