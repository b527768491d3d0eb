// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "topicdiff/data.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "topicdiff/error.hpp"
#include "topicdiff/rng.hpp"

namespace topicdiff {

using nlohmann::json;

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

const char* split_file(int k) {
  static const char* names[] = {"train.jsonl", "val.jsonl", "test.jsonl"};
  return names[k];
}

// Fixed structure shared by every split of one synthetic dataset.
struct TopicWorld {
  std::vector<std::array<std::vector<double>, kNumModalities>> topic_means;    // [G][m]
  std::vector<std::array<std::vector<double>, kNumModalities>> emotion_dirs;   // [C][m]
  std::vector<std::vector<double>> emotion_prior;                              // [G][C]
};

std::vector<double> random_direction(Rng& rng, std::size_t dim, double norm) {
  std::vector<double> v(dim);
  double s = 0;
  for (double& x : v) {
    x = rng.normal();
    s += x * x;
  }
  const double f = s > 0 ? norm / std::sqrt(s) : 0.0;
  for (double& x : v) x *= f;
  return v;
}

TopicWorld make_world(const SynthConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, "world/" + std::to_string(cfg.num_topics)));
  TopicWorld w;
  w.topic_means.resize(cfg.num_topics);
  for (auto& per_mod : w.topic_means)
    for (std::size_t m = 0; m < kNumModalities; ++m) per_mod[m] = random_direction(rng, cfg.dims[m], cfg.topic_separation);
  w.emotion_dirs.resize(cfg.num_classes);
  for (auto& per_mod : w.emotion_dirs)
    for (std::size_t m = 0; m < kNumModalities; ++m) per_mod[m] = random_direction(rng, cfg.dims[m], cfg.snr(m));
  w.emotion_prior.resize(cfg.num_topics);
  for (auto& prior : w.emotion_prior) {
    prior.resize(cfg.num_classes);
    double z = 0;
    for (double& p : prior) z += (p = std::exp(cfg.prior_concentration * rng.normal()));
    for (double& p : prior) p /= z;
  }
  return w;
}

std::size_t draw_categorical(Rng& rng, const std::vector<double>& p) {
  double u = rng.uniform(), acc = 0;
  for (std::size_t c = 0; c < p.size(); ++c)
    if (u < (acc += p[c])) return c;
  return p.size() - 1;
}

Conversation make_conversation(const SynthConfig& cfg, const TopicWorld& w, Rng& rng, const std::string& id,
                               std::size_t length) {
  Conversation conv;
  conv.id = id;
  const auto g = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(cfg.num_topics) - 1));
  conv.topic = g;
  for (std::size_t i = 0; i < length; ++i) {
    Utterance u;
    u.speaker = (i % 2 == 0) ? "A" : "B";
    u.label = draw_categorical(rng, w.emotion_prior[g]);
    for (std::size_t m = 0; m < kNumModalities; ++m) {
      auto& f = u.features[m];
      f.resize(cfg.dims[m]);
      for (std::size_t d = 0; d < f.size(); ++d)
        f[d] = w.topic_means[g][m][d] + w.emotion_dirs[u.label][m][d] + rng.normal();
    }
    conv.utterances.push_back(std::move(u));
  }
  return conv;
}

std::size_t draw_length(const SynthConfig& cfg, Rng& rng) {
  return static_cast<std::size_t>(
      rng.integer(static_cast<std::int64_t>(cfg.min_utterances), static_cast<std::int64_t>(cfg.max_utterances)));
}

std::vector<Conversation> make_split(const SynthConfig& cfg, const TopicWorld& w, const std::string& name,
                                     std::size_t conversations, std::size_t utterance_budget) {
  Rng rng(derive_seed(cfg.seed, "split/" + name + "/" + std::to_string(cfg.num_topics)));
  std::vector<Conversation> out;
  if (utterance_budget > 0) {
    std::size_t used = 0;
    while (used < utterance_budget) {
      const std::size_t len = std::min(draw_length(cfg, rng), utterance_budget - used);
      out.push_back(make_conversation(cfg, w, rng, name + "-" + std::to_string(out.size()), len));
      used += len;
    }
    return out;
  }
  for (std::size_t k = 0; k < conversations; ++k)
    out.push_back(make_conversation(cfg, w, rng, name + "-" + std::to_string(k), draw_length(cfg, rng)));
  return out;
}

std::vector<double> read_vector(const json& j, const char* key, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_array()) throw SchemaError(where + ": missing array '" + key + "'");
  std::vector<double> v;
  v.reserve(it->size());
  for (const auto& x : *it) {
    if (!x.is_number()) throw SchemaError(where + ": non-numeric entry in '" + key + "'");
    v.push_back(x.get<double>());
  }
  return v;
}

json meta_to_json(const DatasetMeta& m) {
  auto split = [](const SplitSizes& s) { return json{{"conversations", s.conversations}, {"utterances", s.utterances}}; };
  return json{{"schema", m.schema},
              {"dims", {{"a", m.dims[0]}, {"v", m.dims[1]}, {"l", m.dims[2]}}},
              {"num_classes", m.num_classes},
              {"class_names", m.class_names},
              {"splits", {{"train", split(m.train)}, {"val", split(m.val)}, {"test", split(m.test)}}},
              {"generator_hash", m.generator_hash},
              {"generator", m.generator}};
}

DatasetMeta meta_from_json(const json& j) {
  DatasetMeta m;
  try {
    m.schema = j.at("schema").get<std::string>();
    if (m.schema != kSchemaVersion) throw SchemaError("meta.json: unsupported schema '" + m.schema + "'");
    const auto& d = j.at("dims");
    m.dims = {d.at("a").get<std::size_t>(), d.at("v").get<std::size_t>(), d.at("l").get<std::size_t>()};
    m.num_classes = j.at("num_classes").get<std::size_t>();
    m.class_names = j.value("class_names", std::vector<std::string>{});
    auto split = [&](const char* k) {
      SplitSizes s;
      if (j.contains("splits") && j["splits"].contains(k)) {
        s.conversations = j["splits"][k].at("conversations").get<std::size_t>();
        s.utterances = j["splits"][k].at("utterances").get<std::size_t>();
      }
      return s;
    };
    m.train = split("train");
    m.val = split("val");
    m.test = split("test");
    m.generator_hash = j.value("generator_hash", std::string{});
    m.generator = j.value("generator", json());
  } catch (const json::exception& e) {
    throw SchemaError(std::string("meta.json: ") + e.what());
  }
  if (m.num_classes < 2) throw SchemaError("meta.json: num_classes must be >= 2");
  for (auto d : m.dims)
    if (d == 0) throw SchemaError("meta.json: feature dims must be positive");
  if (m.class_names.empty()) m.class_names = default_class_names(m.num_classes);
  if (m.class_names.size() != m.num_classes) throw SchemaError("meta.json: class_names does not match num_classes");
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------

void SynthConfig::validate() const {
  if (num_topics < 2) throw ContractError("synthetic config: num_topics must be >= 2");
  if (num_classes < 2) throw ContractError("synthetic config: num_classes must be >= 2");
  if (snr_a < 0 || snr_v < 0 || snr_l < 0) throw ContractError("synthetic config: snr values must be >= 0");
  if (topic_separation < 0 || prior_concentration < 0)
    throw ContractError("synthetic config: topic_separation and prior_concentration must be >= 0");
  if (min_utterances == 0 || min_utterances > max_utterances)
    throw ContractError("synthetic config: need 1 <= min_utterances <= max_utterances");
  if ((train_conversations == 0 && train_utterances == 0) || val_conversations == 0 || test_conversations == 0)
    throw ContractError("synthetic config: every split needs at least one conversation");
  for (auto d : dims)
    if (d == 0) throw ContractError("synthetic config: feature dims must be positive");
}

double SynthConfig::snr(std::size_t modality) const {
  switch (modality) {
    case 0: return snr_a;
    case 1: return snr_v;
    default: return snr_l;
  }
}

void to_json(json& j, const SynthConfig& c) {
  j = json{{"num_topics", c.num_topics},
           {"topic_separation", c.topic_separation},
           {"snr_a", c.snr_a},
           {"snr_v", c.snr_v},
           {"snr_l", c.snr_l},
           {"prior_concentration", c.prior_concentration},
           {"train_conversations", c.train_conversations},
           {"val_conversations", c.val_conversations},
           {"test_conversations", c.test_conversations},
           {"min_utterances", c.min_utterances},
           {"max_utterances", c.max_utterances},
           {"train_utterances", c.train_utterances},
           {"num_classes", c.num_classes},
           {"dims", {{"a", c.dims[0]}, {"v", c.dims[1]}, {"l", c.dims[2]}}},
           {"seed", c.seed}};
}

void from_json(const json& j, SynthConfig& c) {
  static const std::set<std::string> known = {
      "num_topics", "topic_separation", "snr_a", "snr_v", "snr_l", "prior_concentration",
      "train_conversations", "val_conversations", "test_conversations", "min_utterances", "max_utterances",
      "train_utterances", "num_classes", "dims", "seed"};
  if (!j.is_object()) throw ParseError("synthetic config must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ParseError("synthetic config: unknown key '" + k + "'");
  try {
    c.num_topics = j.value("num_topics", c.num_topics);
    c.topic_separation = j.value("topic_separation", c.topic_separation);
    c.snr_a = j.value("snr_a", c.snr_a);
    c.snr_v = j.value("snr_v", c.snr_v);
    c.snr_l = j.value("snr_l", c.snr_l);
    c.prior_concentration = j.value("prior_concentration", c.prior_concentration);
    c.train_conversations = j.value("train_conversations", c.train_conversations);
    c.val_conversations = j.value("val_conversations", c.val_conversations);
    c.test_conversations = j.value("test_conversations", c.test_conversations);
    c.min_utterances = j.value("min_utterances", c.min_utterances);
    c.max_utterances = j.value("max_utterances", c.max_utterances);
    c.train_utterances = j.value("train_utterances", c.train_utterances);
    c.num_classes = j.value("num_classes", c.num_classes);
    if (j.contains("dims")) {
      const auto& d = j["dims"];
      c.dims = {d.value("a", c.dims[0]), d.value("v", c.dims[1]), d.value("l", c.dims[2])};
    }
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw ParseError(std::string("synthetic config: ") + e.what());
  }
}

std::vector<std::string> default_class_names(std::size_t num_classes) {
  static const std::vector<std::string> emotions = {"neutral", "happy", "surprise", "sad", "disgust", "anger", "fear"};
  std::vector<std::string> out;
  for (std::size_t c = 0; c < num_classes; ++c)
    out.push_back(num_classes == emotions.size() ? emotions[c] : "class" + std::to_string(c));
  return out;
}

SplitSizes count(const std::vector<Conversation>& split) {
  SplitSizes s;
  s.conversations = split.size();
  for (const auto& c : split) s.utterances += c.size();
  return s;
}

Dataset generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  const TopicWorld world = make_world(cfg);
  Dataset ds;
  ds.train = make_split(cfg, world, "train", cfg.train_conversations, cfg.train_utterances);
  ds.val = make_split(cfg, world, "val", cfg.val_conversations, 0);
  ds.test = make_split(cfg, world, "test", cfg.test_conversations, 0);
  auto& m = ds.meta;
  m.dims = cfg.dims;
  m.num_classes = cfg.num_classes;
  m.class_names = default_class_names(cfg.num_classes);
  m.train = count(ds.train);
  m.val = count(ds.val);
  m.test = count(ds.test);
  m.generator = cfg;
  m.generator_hash = hex64(fnv1a(m.generator.dump()));
  return ds;
}

std::vector<Dataset> density_sweep(const SynthConfig& cfg, const std::vector<std::size_t>& topic_counts) {
  if (topic_counts.empty()) throw ContractError("density_sweep: no topic counts");
  for (auto g : topic_counts)
    if (g < 2) throw ContractError("density_sweep: topic counts must be >= 2");
  SynthConfig base = cfg;
  if (base.train_utterances == 0)
    base.train_utterances = base.train_conversations * (base.min_utterances + base.max_utterances) / 2;
  std::vector<Dataset> out;
  for (auto g : topic_counts) {
    SynthConfig c = base;
    c.num_topics = g;
    out.push_back(generate_synthetic(c));
  }
  return out;
}

// ---------------------------------------------------------------------------

json conversation_to_json(const Conversation& c) {
  json utts = json::array();
  for (const auto& u : c.utterances)
    utts.push_back(json{{"speaker", u.speaker}, {"label", u.label}, {"a", u.a()}, {"v", u.v()}, {"l", u.l()}});
  json j{{"id", c.id}};
  if (c.topic) j["topic"] = *c.topic;
  j["utterances"] = std::move(utts);
  return j;
}

Conversation conversation_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("conversation must be a JSON object");
  Conversation c;
  const auto id = j.find("id");
  if (id == j.end() || !(id->is_string() || id->is_number_integer()))
    throw SchemaError("conversation: missing 'id'");
  c.id = id->is_string() ? id->get<std::string>() : std::to_string(id->get<long long>());
  const std::string where = "conversation '" + c.id + "'";
  if (j.contains("topic")) {
    if (!j["topic"].is_number_unsigned()) throw SchemaError(where + ": 'topic' must be a non-negative integer");
    c.topic = j["topic"].get<std::size_t>();
  }
  const auto utts = j.find("utterances");
  if (utts == j.end() || !utts->is_array()) throw SchemaError(where + ": missing 'utterances' array");
  for (const auto& uj : *utts) {
    if (!uj.is_object()) throw SchemaError(where + ": utterance must be an object");
    Utterance u;
    const auto label = uj.find("label");
    if (label == uj.end() || !label->is_number_integer() || label->get<long long>() < 0)
      throw SchemaError(where + ": utterance needs a non-negative integer 'label'");
    u.label = label->get<std::size_t>();
    const auto speaker = uj.find("speaker");
    if (speaker != uj.end()) u.speaker = speaker->is_string() ? speaker->get<std::string>() : speaker->dump();
    for (std::size_t m = 0; m < kNumModalities; ++m) {
      const char key[2] = {kModalityKeys[m], '\0'};
      u.features[m] = read_vector(uj, key, where);
    }
    c.utterances.push_back(std::move(u));
  }
  return c;
}

std::string Dataset::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto* split : {&train, &val, &test}) {
    for (const auto& c : *split) h = fnv1a(conversation_to_json(c).dump(), h);
    h = fnv1a("\n--\n", h);
  }
  return hex64(h);
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create dataset directory " + dir.string() + ": " + ec.message());
  {
    std::ofstream os(dir / "meta.json", std::ios::trunc);
    if (!os) throw IoError("cannot write " + (dir / "meta.json").string());
    os << meta_to_json(ds.meta).dump(2) << '\n';
  }
  const std::vector<Conversation>* splits[] = {&ds.train, &ds.val, &ds.test};
  for (int k = 0; k < 3; ++k) {
    std::ofstream os(dir / split_file(k), std::ios::trunc);
    if (!os) throw IoError("cannot write " + (dir / split_file(k)).string());
    for (const auto& c : *splits[k]) os << conversation_to_json(c).dump() << '\n';
    if (!os) throw IoError("failed writing " + (dir / split_file(k)).string());
  }
}

std::vector<Conversation> read_split(std::istream& in, const std::string& name) {
  std::vector<Conversation> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(name + ":" + std::to_string(line_no) + ": malformed JSON (" + e.what() + ")", line_no);
    }
    try {
      out.push_back(conversation_from_json(j));
    } catch (const SchemaError& e) {
      throw SchemaError(name + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void validate_dataset(const Dataset& ds) {
  const auto& m = ds.meta;
  if (m.num_classes < 2) throw SchemaError("dataset: num_classes must be >= 2");
  const std::vector<Conversation>* splits[] = {&ds.train, &ds.val, &ds.test};
  for (int k = 0; k < 3; ++k) {
    if (splits[k]->empty()) throw SchemaError(std::string("dataset: split ") + split_file(k) + " is empty");
    for (const auto& c : *splits[k]) {
      if (c.utterances.empty()) throw SchemaError("conversation '" + c.id + "' has no utterances");
      for (const auto& u : c.utterances) {
        if (u.label >= m.num_classes)
          throw SchemaError("conversation '" + c.id + "': unknown label " + std::to_string(u.label));
        for (std::size_t mod = 0; mod < kNumModalities; ++mod) {
          if (u.features[mod].size() != m.dims[mod])
            throw SchemaError("conversation '" + c.id + "': modality '" + std::string(1, kModalityKeys[mod]) +
                              "' has dim " + std::to_string(u.features[mod].size()) + ", expected " +
                              std::to_string(m.dims[mod]));
          for (double x : u.features[mod])
            if (!std::isfinite(x)) throw SchemaError("conversation '" + c.id + "': non-finite feature value");
        }
      }
    }
  }
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  {
    std::ifstream is(dir / "meta.json");
    if (!is) throw IoError("cannot open " + (dir / "meta.json").string());
    json j;
    try {
      j = json::parse(is);
    } catch (const json::parse_error& e) {
      throw ParseError("meta.json: malformed JSON (" + std::string(e.what()) + ")");
    }
    ds.meta = meta_from_json(j);
  }
  std::vector<Conversation>* splits[] = {&ds.train, &ds.val, &ds.test};
  for (int k = 0; k < 3; ++k) {
    const auto path = dir / split_file(k);
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path.string());
    *splits[k] = read_split(is, split_file(k));
  }
  const SplitSizes* declared[] = {&ds.meta.train, &ds.meta.val, &ds.meta.test};
  for (int k = 0; k < 3; ++k) {
    const SplitSizes found = count(*splits[k]);
    if (declared[k]->conversations != 0 && !(found == *declared[k]))
      throw SchemaError(std::string(split_file(k)) + ": holds " + std::to_string(found.conversations) +
                        " conversations / " + std::to_string(found.utterances) + " utterances, meta.json declares " +
                        std::to_string(declared[k]->conversations) + " / " + std::to_string(declared[k]->utterances));
  }
  validate_dataset(ds);
  return ds;
}

}  // namespace topicdiff
