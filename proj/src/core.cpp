#include "cai/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

#include "cai/error.hpp"
#include "cai/io.hpp"
#include "cai/random.hpp"

namespace cai {

namespace fs = std::filesystem;

std::string canonical_label(std::string_view raw) {
    const auto first = raw.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = raw.find_last_not_of(" \t\r\n");
    std::string out(raw.substr(first, last - first + 1));
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

// ---------------------------------------------------------------- LabelSpace

LabelSpace::LabelSpace(std::vector<std::string> sorted_unique) : labels_(std::move(sorted_unique)) {
    for (LabelId i = 0; i < labels_.size(); ++i) {
        index_.emplace(labels_[i], i);
    }
}

LabelSpace LabelSpace::from_declared(std::vector<std::string> labels) {
    for (auto& l : labels) {
        l = canonical_label(l);
        if (l.empty()) throw Error(ErrorCode::invalid_argument, "empty label in label space");
    }
    std::sort(labels.begin(), labels.end());
    if (auto dup = std::adjacent_find(labels.begin(), labels.end()); dup != labels.end()) {
        throw Error(ErrorCode::invalid_argument, "duplicate label after canonicalization: " + *dup);
    }
    if (labels.empty()) throw Error(ErrorCode::invalid_argument, "empty label space");
    return LabelSpace(std::move(labels));
}

LabelSpace LabelSpace::from_observed(std::span<const std::string> labels) {
    std::set<std::string> unique;
    for (const auto& l : labels) {
        auto c = canonical_label(l);
        if (c.empty()) throw Error(ErrorCode::invalid_argument, "empty label in label space");
        unique.insert(std::move(c));
    }
    if (unique.empty()) throw Error(ErrorCode::invalid_argument, "empty label space");
    return LabelSpace(std::vector<std::string>(unique.begin(), unique.end()));
}

const std::string& LabelSpace::name(LabelId id) const {
    if (id >= labels_.size()) {
        throw Error(ErrorCode::invalid_argument, "label id out of range: " + std::to_string(id));
    }
    return labels_[id];
}

std::optional<LabelId> LabelSpace::find(std::string_view raw) const {
    auto it = index_.find(canonical_label(raw));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

LabelId LabelSpace::id(std::string_view raw) const {
    if (auto id = find(raw)) return *id;
    throw Error(ErrorCode::invalid_argument, "label outside label space: " + std::string(raw));
}

// ---------------------------------------------------------------- Corpus

Corpus::Corpus(std::vector<TextInstance> instances, LabelSpace label_space)
    : instances_(std::move(instances)), label_space_(std::move(label_space)) {
    std::optional<std::size_t> dim;
    for (std::size_t i = 0; i < instances_.size(); ++i) {
        const auto& inst = instances_[i];
        if (inst.text.find_first_not_of(" \t\r\n") == std::string::npos) {
            throw Error(ErrorCode::invalid_argument, "instance " + inst.id + " has empty text");
        }
        if (!position_.emplace(inst.id, i).second) {
            throw Error(ErrorCode::invalid_argument, "duplicate id " + inst.id);
        }
        if (inst.gold && *inst.gold >= label_space_.size()) {
            throw Error(ErrorCode::invalid_argument, "instance " + inst.id + " has a gold label outside the label space");
        }
        if (inst.vector) {
            if (dim && *dim != inst.vector->dim()) {
                throw Error(ErrorCode::invalid_argument, "inconsistent embedding dimension at " + inst.id);
            }
            dim = inst.vector->dim();
        }
    }
}

const TextInstance* Corpus::find(std::string_view id) const {
    auto it = position_.find(std::string(id));
    return it == position_.end() ? nullptr : &instances_[it->second];
}

const TextInstance& Corpus::at(std::string_view id) const {
    if (const auto* inst = find(id)) return *inst;
    throw Error(ErrorCode::not_found, "unknown id " + std::string(id));
}

std::vector<std::string> Corpus::ids() const {
    std::vector<std::string> out;
    out.reserve(instances_.size());
    for (const auto& inst : instances_) out.push_back(inst.id);
    return out;
}

bool Corpus::has_vectors() const {
    return std::any_of(instances_.begin(), instances_.end(), [](const auto& i) { return i.vector.has_value(); });
}

EmbeddingMap Corpus::vectors() const {
    EmbeddingMap out;
    for (const auto& inst : instances_) {
        if (inst.vector) out.emplace(inst.id, *inst.vector);
    }
    return out;
}

std::vector<std::string> read_label_list(const fs::path& path) {
    const std::string content = io::read_file(path);
    const auto first = content.find_first_not_of(" \t\r\n");
    std::vector<std::string> labels;
    if (first != std::string::npos && content[first] == '{') {
        try {
            auto j = nlohmann::json::parse(content);
            labels = j.at("labels").get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception&) {
            throw Error(ErrorCode::parse, path.string() + ": expected {\"labels\": [...]}");
        }
        return labels;
    }
    std::istringstream in(content);
    std::string line;
    while (std::getline(in, line)) {
        if (!canonical_label(line).empty()) labels.push_back(line);
    }
    return labels;
}

namespace {

struct RawRecord {
    std::size_t line;
    std::string id;
    std::string text;
    std::optional<std::string> gold;
    std::optional<std::vector<double>> vector;
};

std::string at_line(const fs::path& path, std::size_t line) {
    return path.string() + ": line " + std::to_string(line) + ": ";
}

}  // namespace

Corpus load_corpus(const fs::path& path, const std::optional<fs::path>& labels_sidecar) {
    std::optional<std::vector<std::string>> declared;
    if (labels_sidecar) declared = read_label_list(*labels_sidecar);

    std::vector<RawRecord> records;
    std::set<std::string, std::less<>> seen;
    std::optional<std::size_t> dim;
    bool first = true;

    io::for_each_jsonl(path, [&](std::size_t line, const nlohmann::json& j) {
        const bool is_first = std::exchange(first, false);
        if (!j.is_object()) {
            throw Error(ErrorCode::parse, at_line(path, line) + "expected a JSON object");
        }
        if (is_first && j.contains("labels") && !j.contains("id")) {
            try {
                auto header = j.at("labels").get<std::vector<std::string>>();
                if (!declared) declared.emplace();
                declared->insert(declared->end(), header.begin(), header.end());
            } catch (const nlohmann::json::exception&) {
                throw Error(ErrorCode::parse, at_line(path, line) + "labels header must be a list of strings");
            }
            return;
        }
        RawRecord rec{line, {}, {}, {}, {}};
        try {
            rec.id = j.at("id").get<std::string>();
            rec.text = j.at("text").get<std::string>();
            if (j.contains("gold") && !j.at("gold").is_null()) rec.gold = j.at("gold").get<std::string>();
            if (j.contains("vector") && !j.at("vector").is_null()) {
                rec.vector = j.at("vector").get<std::vector<double>>();
            }
        } catch (const nlohmann::json::exception&) {
            throw Error(ErrorCode::parse, at_line(path, line) + "malformed record (need string id and text)");
        }
        if (rec.id.empty()) throw Error(ErrorCode::parse, at_line(path, line) + "empty id");
        if (!seen.insert(rec.id).second) {
            throw Error(ErrorCode::invalid_argument, at_line(path, line) + "duplicate id " + rec.id);
        }
        if (rec.text.find_first_not_of(" \t\r\n") == std::string::npos) {
            throw Error(ErrorCode::invalid_argument, at_line(path, line) + "empty text for id " + rec.id);
        }
        if (rec.vector) {
            if (dim && *dim != rec.vector->size()) {
                throw Error(ErrorCode::invalid_argument, at_line(path, line) + "inconsistent embedding dimension");
            }
            dim = rec.vector->size();
        }
        records.push_back(std::move(rec));
    });

    LabelSpace space;
    if (declared) {
        space = LabelSpace::from_declared(*declared);
        for (const auto& rec : records) {
            if (rec.gold && !space.find(*rec.gold)) {
                throw Error(ErrorCode::invalid_argument,
                            at_line(path, rec.line) + "gold label outside declared label space: " + *rec.gold);
            }
        }
    } else {
        std::vector<std::string> golds;
        for (const auto& rec : records) {
            if (rec.gold) golds.push_back(*rec.gold);
        }
        if (golds.empty()) {
            throw Error(ErrorCode::invalid_argument,
                        path.string() + ": no label space (declare a labels header or sidecar, or provide golds)");
        }
        space = LabelSpace::from_observed(golds);
    }

    std::vector<TextInstance> instances;
    instances.reserve(records.size());
    for (auto& rec : records) {
        TextInstance inst{std::move(rec.id), std::move(rec.text), std::nullopt, std::nullopt};
        if (rec.gold) inst.gold = space.id(*rec.gold);
        if (rec.vector) {
            try {
                inst.vector.emplace(std::move(*rec.vector));
            } catch (const Error& e) {
                throw Error(ErrorCode::invalid_argument, at_line(path, rec.line) + e.what());
            }
        }
        instances.push_back(std::move(inst));
    }
    return Corpus(std::move(instances), std::move(space));
}

void save_corpus(const Corpus& corpus, const fs::path& path) {
    std::string out;
    io::Json header;
    header["labels"] = corpus.label_space().labels();
    out += header.dump() + "\n";
    for (const auto& inst : corpus.instances()) {
        io::Json j;
        j["id"] = inst.id;
        j["text"] = inst.text;
        if (inst.gold) j["gold"] = corpus.label_space().name(*inst.gold);
        if (inst.vector) {
            j["vector"] = std::vector<double>(inst.vector->values().begin(), inst.vector->values().end());
        }
        out += j.dump() + "\n";
    }
    io::write_file(path, out);
}

// ---------------------------------------------------------------- preference split

std::string_view to_string(SplitStrategy s) {
    return s == SplitStrategy::random ? "random" : "stratified";
}

SplitStrategy parse_split_strategy(std::string_view s) {
    if (s == "random") return SplitStrategy::random;
    if (s == "stratified") return SplitStrategy::stratified;
    throw Error(ErrorCode::invalid_argument, "unknown split strategy: " + std::string(s));
}

SplitStrategy default_split_strategy(const Corpus& corpus) {
    const auto& inst = corpus.instances();
    return std::any_of(inst.begin(), inst.end(), [](const auto& i) { return i.gold.has_value(); })
               ? SplitStrategy::stratified
               : SplitStrategy::random;
}

std::size_t preference_size(std::size_t n, double fraction, std::size_t labels_present) {
    const auto rounded = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 0.5));
    return std::max(labels_present, rounded);
}

PreferenceSplit split_preference(const Corpus& corpus, double fraction, std::uint64_t seed, SplitStrategy strategy) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw Error(ErrorCode::invalid_argument, "preference fraction must be in (0, 1]");
    }
    const auto& instances = corpus.instances();
    const std::size_t n_labels = corpus.label_space().size();

    // Eligible pool per label, in corpus order.
    std::vector<std::vector<std::size_t>> by_label(n_labels);
    for (std::size_t i = 0; i < instances.size(); ++i) {
        if (instances[i].gold) by_label[*instances[i].gold].push_back(i);
    }
    std::size_t labels_present = 0;
    std::size_t eligible = 0;
    for (LabelId l = 0; l < n_labels; ++l) {
        if (!by_label[l].empty()) ++labels_present;
        eligible += by_label[l].size();
    }
    if (eligible == 0) {
        throw Error(ErrorCode::precondition, "preference split needs gold-labeled instances");
    }
    if (strategy == SplitStrategy::stratified && labels_present < n_labels) {
        for (LabelId l = 0; l < n_labels; ++l) {
            if (by_label[l].empty()) {
                throw Error(ErrorCode::precondition,
                            "stratified split: label '" + corpus.label_space().name(l) + "' has no gold samples");
            }
        }
    }

    const std::size_t target = preference_size(instances.size(), fraction, labels_present);
    if (target > eligible) {
        throw Error(ErrorCode::precondition, "preference size " + std::to_string(target) + " exceeds the " +
                                                 std::to_string(eligible) + " gold-labeled instances");
    }

    Rng rng(seed);
    std::vector<bool> chosen(instances.size(), false);
    std::vector<std::size_t> pool;
    std::size_t picked = 0;
    if (strategy == SplitStrategy::stratified) {
        for (LabelId l = 0; l < n_labels; ++l) {
            auto& members = by_label[l];
            const std::size_t pick = members[rng.below(members.size())];
            chosen[pick] = true;
            ++picked;
        }
    }
    for (const auto& members : by_label) {
        for (std::size_t i : members) {
            if (!chosen[i]) pool.push_back(i);
        }
    }
    std::sort(pool.begin(), pool.end());
    rng.shuffle(std::span<std::size_t>(pool));
    for (std::size_t k = 0; picked < target; ++k, ++picked) {
        chosen[pool[k]] = true;
    }

    PreferenceSplit split;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        if (chosen[i]) {
            split.preference.emplace_back(instances[i].id, *instances[i].gold);
        } else {
            split.remainder.push_back(instances[i].id);
        }
    }
    return split;
}

// ---------------------------------------------------------------- clusters

Cluster::Cluster(LabelId label, std::size_t dim) : label_(label), dim_(dim) {}

void Cluster::add(std::string id, const EmbeddingVector& v) {
    if (v.dim() != dim_) {
        throw Error(ErrorCode::invalid_argument, "dimension mismatch for cluster member " + id);
    }
    ids_.push_back(std::move(id));
    rows_.insert(rows_.end(), v.values().begin(), v.values().end());
    norms_.push_back(v.norm());
}

PreferenceClusterSet::PreferenceClusterSet(std::map<LabelId, Cluster> clusters) : clusters_(std::move(clusters)) {
    if (clusters_.empty()) throw Error(ErrorCode::invalid_argument, "no clusters");
    std::set<std::string, std::less<>> seen;
    dim_ = clusters_.begin()->second.dim();
    for (const auto& [label, cluster] : clusters_) {
        if (cluster.size() == 0) throw Error(ErrorCode::invalid_argument, "empty cluster");
        if (cluster.label() != label) throw Error(ErrorCode::invalid_argument, "cluster label mismatch");
        if (cluster.dim() != dim_) throw Error(ErrorCode::invalid_argument, "clusters differ in dimension");
        for (const auto& id : cluster.ids()) {
            if (!seen.insert(id).second) {
                throw Error(ErrorCode::invalid_argument, "id " + id + " appears in more than one cluster");
            }
        }
        total_ += cluster.size();
    }
}

PreferenceClusterSet build_clusters(std::span<const LabeledId> preference, const EmbeddingMap& embeddings) {
    if (preference.empty()) throw Error(ErrorCode::invalid_argument, "no clusters");
    std::map<LabelId, Cluster> clusters;
    for (const auto& [id, label] : preference) {
        auto it = embeddings.find(id);
        if (it == embeddings.end()) {
            throw Error(ErrorCode::not_found, "missing embedding for preference id " + id);
        }
        auto [slot, inserted] = clusters.try_emplace(label, label, it->second.dim());
        slot->second.add(id, it->second);
    }
    return PreferenceClusterSet(std::move(clusters));
}

void save_preference(std::span<const LabeledId> preference, const LabelSpace& space, const fs::path& path) {
    std::string out;
    for (const auto& [id, label] : preference) {
        io::Json j;
        j["id"] = id;
        j["label"] = space.name(label);
        out += j.dump() + "\n";
    }
    io::write_file(path, out);
}

std::vector<LabeledId> load_preference(const fs::path& path, const LabelSpace& space) {
    if (!fs::exists(path)) {
        throw Error(ErrorCode::not_found, "preference file not found: " + path.string());
    }
    std::vector<LabeledId> out;
    io::for_each_jsonl(path, [&](std::size_t line, const nlohmann::json& j) {
        try {
            out.emplace_back(j.at("id").get<std::string>(), space.id(j.at("label").get<std::string>()));
        } catch (const nlohmann::json::exception&) {
            throw Error(ErrorCode::parse, at_line(path, line) + "expected {\"id\":..., \"label\":...}");
        }
    });
    return out;
}

}  // namespace cai
