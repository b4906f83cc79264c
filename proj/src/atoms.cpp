#include "codesynth/atoms.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "codesynth/errors.hpp"
#include "codesynth/rng.hpp"

namespace fs = std::filesystem;

namespace codesynth {

std::vector<std::string> default_topics() {
  return {"math",       "string operation", "sorting",    "searching",
          "counting",   "list operation",   "conversion", "filtering",
          "aggregation", "validation"};
}

AtomCorpus::AtomCorpus(std::vector<AtomicFunction> atoms)
    : atoms_(std::move(atoms)) {
  for (size_t i = 0; i < atoms_.size(); ++i) {
    if (!index_.emplace(atoms_[i].id, i).second)
      throw DuplicateIdError(atoms_[i].id);
    by_input_type_[static_cast<size_t>(atoms_[i].input_type)].push_back(i);
  }
}

const AtomicFunction& AtomCorpus::by_id(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw UnknownAtomIdError(id);
  return atoms_[it->second];
}

bool AtomCorpus::contains(const std::string& id) const {
  return index_.count(id) != 0;
}

std::vector<const AtomicFunction*> AtomCorpus::with_input_type(
    ValueType t) const {
  std::vector<const AtomicFunction*> out;
  for (size_t i : by_input_type_[static_cast<size_t>(t)])
    out.push_back(&atoms_[i]);
  return out;
}

std::string AtomCorpus::content_hash() const {
  uint64_t h = 1469598103934665603ull;
  auto feed = [&h](const std::string& s) {
    h ^= fnv1a64(s);
    h *= 1099511628211ull;
  };
  for (const auto& a : atoms_) {
    feed(a.id);
    feed(a.topic);
    feed(a.prompt);
    feed(a.fn_name);
    feed(to_string(a.input_type));
    feed(to_string(a.output_type));
    feed(a.code);
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

AtomCorpus AtomCorpus::subset(const std::vector<std::string>& ids) const {
  std::set<std::string> wanted(ids.begin(), ids.end());
  std::vector<AtomicFunction> picked;
  for (const auto& a : atoms_)
    if (wanted.count(a.id)) picked.push_back(a);
  return AtomCorpus(std::move(picked));
}

const std::vector<std::string>& CorpusPartition::set_by_label(
    const std::string& label) const {
  if (label == "a" || label == "set_a") return set_a;
  if (label == "b" || label == "set_b") return set_b;
  if (label == "c" || label == "set_c") return set_c;
  throw Error("unknown partition label '" + label + "'");
}

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << content;
}

std::string require_string(const Json& j, const char* field,
                           const std::string& entry) {
  if (!j.contains(field) || !j[field].is_string())
    throw MissingFieldError(entry, field);
  return j[field].get<std::string>();
}

// "fn_name appears as a function definition in code": a `def <name>` token
// followed by '('. This is the structural check at load time; the sandbox
// compile check runs in validate_atom.
bool defines_function(const std::string& code, const std::string& fn_name) {
  const std::string needle = "def " + fn_name;
  size_t pos = 0;
  while ((pos = code.find(needle, pos)) != std::string::npos) {
    size_t after = pos + needle.size();
    while (after < code.size() &&
           (code[after] == ' ' || code[after] == '\t'))
      ++after;
    if (after < code.size() && code[after] == '(') return true;
    pos += needle.size();
  }
  return false;
}

AtomicFunction parse_atom(const Json& j, const std::string& entry,
                          const LoadOptions& opts) {
  AtomicFunction a;
  a.id = require_string(j, "id", entry);
  a.topic = require_string(j, "topic", entry);
  a.prompt = require_string(j, "prompt", entry);
  a.fn_name = require_string(j, "fn_name", entry);
  a.input_type = parse_value_type(require_string(j, "input_type", entry), entry);
  a.output_type =
      parse_value_type(require_string(j, "output_type", entry), entry);
  a.code = require_string(j, "code", entry);
  if (!defines_function(a.code, a.fn_name))
    throw UnparseableCodeError(entry,
                               "no definition of '" + a.fn_name + "' found");
  if (opts.warn_unknown_topics &&
      std::find(opts.topics.begin(), opts.topics.end(), a.topic) ==
          opts.topics.end())
    std::cerr << "warning: " << entry << ": topic '" << a.topic
              << "' is not in the configured taxonomy\n";
  return a;
}

}  // namespace

AtomCorpus load_corpus(const std::string& path, const LoadOptions& opts) {
  fs::path manifest_path(path);
  if (fs::is_directory(manifest_path)) manifest_path /= "manifest.json";
  if (!fs::exists(manifest_path))
    throw IoError("corpus manifest not found: " + manifest_path.string());

  Json manifest;
  try {
    manifest = Json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(manifest_path.string() + ": " + e.what());
  }
  if (!manifest.contains("atoms") || !manifest["atoms"].is_array())
    throw MissingFieldError(manifest_path.string(), "atoms");

  const fs::path base = manifest_path.parent_path();
  std::vector<AtomicFunction> atoms;
  for (const auto& rel : manifest["atoms"]) {
    if (!rel.is_string())
      throw MissingFieldError(manifest_path.string(), "atoms[] entry");
    fs::path ap = base / rel.get<std::string>();
    Json j;
    try {
      j = Json::parse(read_file(ap));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(ap.string() + ": " + e.what());
    }
    atoms.push_back(parse_atom(j, ap.string(), opts));
  }
  return AtomCorpus(std::move(atoms));
}

void save_corpus(const AtomCorpus& corpus, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "atoms");
  Json manifest;
  manifest["atoms"] = Json::array();
  for (const auto& a : corpus.atoms()) {
    Json j;
    j["id"] = a.id;
    j["topic"] = a.topic;
    j["prompt"] = a.prompt;
    j["fn_name"] = a.fn_name;
    j["input_type"] = to_string(a.input_type);
    j["output_type"] = to_string(a.output_type);
    j["code"] = a.code;
    std::string rel = "atoms/" + a.id + ".json";
    write_file(fs::path(dir) / rel, j.dump(2) + "\n");
    manifest["atoms"].push_back(rel);
  }
  write_file(fs::path(dir) / "manifest.json", manifest.dump(2) + "\n");
}

std::vector<const AtomicFunction*> atoms_with_input_type(const AtomCorpus& c,
                                                         ValueType t) {
  return c.with_input_type(t);
}

CorpusPartition partition_corpus(const AtomCorpus& corpus,
                                 const std::array<size_t, 3>& sizes,
                                 uint64_t seed) {
  const size_t total = sizes[0] + sizes[1] + sizes[2];
  if (total != corpus.size()) throw SizesDontSumError(total, corpus.size());

  std::vector<std::string> ids;
  ids.reserve(corpus.size());
  for (const auto& a : corpus.atoms()) ids.push_back(a.id);

  Rng rng(seed);
  rng.shuffle(ids);

  CorpusPartition p;
  p.seed = seed;
  p.set_a.assign(ids.begin(), ids.begin() + sizes[0]);
  p.set_b.assign(ids.begin() + sizes[0], ids.begin() + sizes[0] + sizes[1]);
  p.set_c.assign(ids.begin() + sizes[0] + sizes[1], ids.end());
  return p;
}

Json partition_to_json(const CorpusPartition& p) {
  Json j;
  j["seed"] = p.seed;
  j["set_a"] = p.set_a;
  j["set_b"] = p.set_b;
  j["set_c"] = p.set_c;
  return j;
}

CorpusPartition partition_from_json(const Json& j) {
  CorpusPartition p;
  for (const char* f : {"seed", "set_a", "set_b", "set_c"})
    if (!j.contains(f)) throw MissingFieldError("partition", f);
  p.seed = j["seed"].get<uint64_t>();
  p.set_a = j["set_a"].get<std::vector<std::string>>();
  p.set_b = j["set_b"].get<std::vector<std::string>>();
  p.set_c = j["set_c"].get<std::vector<std::string>>();
  return p;
}

}  // namespace codesynth
