#include "brw/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>

#include <openssl/evp.h>

#include "brw/errors.hpp"

namespace brw {

namespace {

struct Cursor {
    const std::string& text;
    std::size_t pos = 0;

    bool eof() const { return pos >= text.size(); }
    char peek() const { return text[pos]; }
    char take() { return text[pos++]; }

    void skip_inline_ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos;
    }
    void skip_comment() {
        if (!eof() && peek() == '#')
            while (!eof() && peek() != '\n') ++pos;
    }
    // Whitespace, comments and newlines (used inside arrays and between
    // statements).
    void skip_filler() {
        for (;;) {
            skip_inline_ws();
            skip_comment();
            if (!eof() && (peek() == '\n' || peek() == '\r')) {
                ++pos;
                continue;
            }
            break;
        }
    }
    [[noreturn]] void fail(const std::string& what) const {
        std::size_t line = 1;
        for (std::size_t i = 0; i < pos && i < text.size(); ++i)
            if (text[i] == '\n') ++line;
        throw ConfigError("config parse error at line " + std::to_string(line) + ": " +
                          what);
    }
};

bool is_bare_key_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

std::string parse_basic_string(Cursor& c) {
    if (c.take() != '"') c.fail("expected string");
    std::string out;
    while (!c.eof()) {
        const char ch = c.take();
        if (ch == '"') return out;
        if (ch == '\\') {
            if (c.eof()) c.fail("dangling escape");
            const char esc = c.take();
            switch (esc) {
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                default: c.fail("unsupported escape sequence");
            }
        } else if (ch == '\n') {
            c.fail("unterminated string");
        } else {
            out += ch;
        }
    }
    c.fail("unterminated string");
}

std::string parse_key(Cursor& c) {
    c.skip_inline_ws();
    if (c.eof()) c.fail("expected key");
    if (c.peek() == '"') return parse_basic_string(c);
    std::string key;
    while (!c.eof() && is_bare_key_char(c.peek())) key += c.take();
    if (key.empty()) c.fail("expected key");
    return key;
}

nlohmann::json parse_value(Cursor& c);

nlohmann::json parse_number(Cursor& c) {
    std::string tok;
    while (!c.eof() &&
           (std::isdigit(static_cast<unsigned char>(c.peek())) || c.peek() == '+' ||
            c.peek() == '-' || c.peek() == '.' || c.peek() == 'e' || c.peek() == 'E' ||
            c.peek() == '_'))
        tok += c.take();
    if (tok.find('.') != std::string::npos || tok.find('e') != std::string::npos ||
        tok.find('E') != std::string::npos)
        c.fail("real-valued settings must be quoted decimal strings: '" + tok + "'");
    std::string digits;
    for (char ch : tok)
        if (ch != '_') digits += ch;
    std::int64_t v = 0;
    const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), v);
    if (res.ec != std::errc() || res.ptr != digits.data() + digits.size())
        c.fail("malformed integer '" + tok + "'");
    return v;
}

nlohmann::json parse_array(Cursor& c) {
    c.take();  // '['
    auto arr = nlohmann::json::array();
    for (;;) {
        c.skip_filler();
        if (c.eof()) c.fail("unterminated array");
        if (c.peek() == ']') {
            c.take();
            return arr;
        }
        arr.push_back(parse_value(c));
        c.skip_filler();
        if (!c.eof() && c.peek() == ',') {
            c.take();
            continue;
        }
        if (!c.eof() && c.peek() == ']') {
            c.take();
            return arr;
        }
        c.fail("expected ',' or ']' in array");
    }
}

nlohmann::json parse_inline_table(Cursor& c) {
    c.take();  // '{'
    auto obj = nlohmann::json::object();
    c.skip_inline_ws();
    if (!c.eof() && c.peek() == '}') {
        c.take();
        return obj;
    }
    for (;;) {
        const std::string key = parse_key(c);
        c.skip_inline_ws();
        if (c.eof() || c.take() != '=') c.fail("expected '=' in inline table");
        c.skip_inline_ws();
        if (obj.contains(key)) c.fail("duplicate key '" + key + "'");
        obj[key] = parse_value(c);
        c.skip_inline_ws();
        if (!c.eof() && c.peek() == ',') {
            c.take();
            c.skip_inline_ws();
            continue;
        }
        if (!c.eof() && c.peek() == '}') {
            c.take();
            return obj;
        }
        c.fail("expected ',' or '}' in inline table");
    }
}

nlohmann::json parse_value(Cursor& c) {
    c.skip_inline_ws();
    if (c.eof()) c.fail("expected value");
    const char ch = c.peek();
    if (ch == '"') return parse_basic_string(c);
    if (ch == '[') return parse_array(c);
    if (ch == '{') return parse_inline_table(c);
    if (c.text.compare(c.pos, 4, "true") == 0 &&
        (c.pos + 4 >= c.text.size() || !is_bare_key_char(c.text[c.pos + 4]))) {
        c.pos += 4;
        return true;
    }
    if (c.text.compare(c.pos, 5, "false") == 0 &&
        (c.pos + 5 >= c.text.size() || !is_bare_key_char(c.text[c.pos + 5]))) {
        c.pos += 5;
        return false;
    }
    if (ch == '+' || ch == '-' || std::isdigit(static_cast<unsigned char>(ch)))
        return parse_number(c);
    c.fail("unrecognised value");
}

std::vector<std::string> parse_table_path(Cursor& c) {
    std::vector<std::string> path;
    for (;;) {
        path.push_back(parse_key(c));
        c.skip_inline_ws();
        if (!c.eof() && c.peek() == '.') {
            c.take();
            continue;
        }
        return path;
    }
}

nlohmann::json* navigate(nlohmann::json& root, const std::vector<std::string>& path,
                         Cursor& c) {
    nlohmann::json* cur = &root;
    for (const auto& key : path) {
        if (!cur->is_object()) c.fail("table path collides with a value");
        auto& slot = (*cur)[key];
        if (slot.is_null()) slot = nlohmann::json::object();
        if (slot.is_array()) {
            if (slot.empty()) c.fail("empty table array");
            cur = &slot.back();
        } else {
            cur = &slot;
        }
    }
    return cur;
}

}  // namespace

nlohmann::json parse_toml_subset(const std::string& text) {
    Cursor c{text};
    auto root = nlohmann::json::object();
    nlohmann::json* current = &root;

    for (;;) {
        c.skip_filler();
        if (c.eof()) break;
        if (c.peek() == '[') {
            c.take();
            const bool array_table = !c.eof() && c.peek() == '[';
            if (array_table) c.take();
            const auto path = parse_table_path(c);
            c.skip_inline_ws();
            if (c.eof() || c.take() != ']') c.fail("unterminated table header");
            if (array_table && (c.eof() || c.take() != ']'))
                c.fail("unterminated table-array header");
            if (array_table) {
                auto parent_path = path;
                const std::string leaf = parent_path.back();
                parent_path.pop_back();
                nlohmann::json* parent = navigate(root, parent_path, c);
                auto& slot = (*parent)[leaf];
                if (slot.is_null()) slot = nlohmann::json::array();
                if (!slot.is_array()) c.fail("table-array path collides with a value");
                slot.push_back(nlohmann::json::object());
                current = &slot.back();
            } else {
                current = navigate(root, path, c);
            }
            continue;
        }
        const std::string key = parse_key(c);
        c.skip_inline_ws();
        if (c.eof() || c.take() != '=') c.fail("expected '=' after key '" + key + "'");
        if (current->contains(key)) c.fail("duplicate key '" + key + "'");
        (*current)[key] = parse_value(c);
        c.skip_inline_ws();
        c.skip_comment();
        if (!c.eof() && c.peek() != '\n' && c.peek() != '\r')
            c.fail("trailing characters after value for key '" + key + "'");
    }
    return root;
}

double parse_decimal(const std::string& text) {
    if (text.empty()) throw ConfigError("empty decimal string");
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size())
        throw ConfigError("malformed decimal string '" + text + "'");
    return v;
}

namespace {

const nlohmann::json* find(const nlohmann::json& obj, const std::string& key) {
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

double require_decimal(const nlohmann::json& obj, const std::string& key,
                       const std::string& where) {
    const auto* v = find(obj, key);
    if (v == nullptr || !v->is_string())
        throw ConfigError(where + "." + key + " must be a quoted decimal string");
    return parse_decimal(v->get<std::string>());
}

double optional_decimal(const nlohmann::json& obj, const std::string& key,
                        double fallback, const std::string& where) {
    if (find(obj, key) == nullptr) return fallback;
    return require_decimal(obj, key, where);
}

std::int64_t require_int(const nlohmann::json& obj, const std::string& key,
                         const std::string& where) {
    const auto* v = find(obj, key);
    if (v == nullptr || !v->is_number_integer())
        throw ConfigError(where + "." + key + " must be an integer");
    return v->get<std::int64_t>();
}

std::int64_t optional_int(const nlohmann::json& obj, const std::string& key,
                          std::int64_t fallback, const std::string& where) {
    if (find(obj, key) == nullptr) return fallback;
    return require_int(obj, key, where);
}

std::string require_string(const nlohmann::json& obj, const std::string& key,
                           const std::string& where) {
    const auto* v = find(obj, key);
    if (v == nullptr || !v->is_string())
        throw ConfigError(where + "." + key + " must be a string");
    return v->get<std::string>();
}

bool optional_bool(const nlohmann::json& obj, const std::string& key, bool fallback,
                   const std::string& where) {
    const auto* v = find(obj, key);
    if (v == nullptr) return fallback;
    if (!v->is_boolean()) throw ConfigError(where + "." + key + " must be a boolean");
    return v->get<bool>();
}

IncrementLaw build_increment(const nlohmann::json& inc) {
    const std::string kind = require_string(inc, "kind", "model.increment");
    if (kind == "gaussian") {
        return IncrementLaw::gaussian(require_decimal(inc, "mu", "model.increment"),
                                      require_decimal(inc, "sigma", "model.increment"));
    }
    if (kind == "shifted_exponential") {
        return IncrementLaw::shifted_exponential(
            require_decimal(inc, "rate", "model.increment"),
            require_decimal(inc, "shift", "model.increment"));
    }
    if (kind == "uniform") {
        return IncrementLaw::uniform(require_decimal(inc, "a", "model.increment"),
                                     require_decimal(inc, "b", "model.increment"));
    }
    if (kind == "lattice_pmf") {
        const double span = optional_decimal(inc, "span", 1.0, "model.increment");
        const auto* points = find(inc, "points");
        const auto* masses = find(inc, "masses");
        if (points == nullptr || !points->is_array() || masses == nullptr ||
            !masses->is_array() || points->size() != masses->size())
            throw ConfigError(
                "model.increment needs matching 'points' (integers) and 'masses' "
                "(decimal strings)");
        std::vector<std::int64_t> pts;
        std::vector<double> ms;
        for (const auto& p : *points) {
            if (!p.is_number_integer())
                throw ConfigError("model.increment.points must be integers");
            pts.push_back(p.get<std::int64_t>());
        }
        for (const auto& m : *masses) {
            if (!m.is_string())
                throw ConfigError("model.increment.masses must be decimal strings");
            ms.push_back(parse_decimal(m.get<std::string>()));
        }
        return IncrementLaw::lattice(std::move(pts), std::move(ms), span);
    }
    throw ConfigError("model.increment.kind '" + kind + "' is not recognised");
}

}  // namespace

bool DiagnosticsConfig::wants(const std::string& name) const {
    return std::find(list.begin(), list.end(), name) != list.end();
}

OffspringLaw RunConfig::offspring() const {
    try {
        return OffspringLaw::from_pmf(offspring_pmf);
    } catch (const Error& e) {
        throw ConfigError(std::string("model.offspring invalid: ") + e.what());
    }
}

const IncrementLaw& RunConfig::increment_law() const {
    if (!increment) throw ConfigError("config has no increment law");
    return *increment;
}

PruneRule RunConfig::prune_rule(const ModelConstants* constants) const {
    switch (prune_mode) {
        case PruneMode::None:
            return PruneRule::none();
        case PruneMode::Default:
            if (constants == nullptr)
                throw ConfigError("default prune rule needs calibrated constants");
            return PruneRule::default_rule(*constants, horizon);
        case PruneMode::Gap:
            return PruneRule::gap_below_max(prune_gap, prune_audit);
        case PruneMode::Line:
            return PruneRule::below_line(prune_slope, prune_offset, prune_audit);
    }
    return PruneRule::none();
}

QuerySet RunConfig::query_set() const {
    QuerySet qs;
    qs.record_traces = record_traces;
    qs.traces_upto = traces_upto;
    qs.retain_genealogy = retain_genealogy;
    for (const auto& q : queries) {
        if (q.family == BarrierEventQuery::Family::GBeta) {
            qs.add_gbeta(q.z);
        } else {
            const int ell = q.ell > 0 ? q.ell : QuerySet::default_ell(q.z);
            qs.add_event(q.family, q.z, ell);
        }
    }
    return qs;
}

bool RunConfig::needs_constants() const {
    return record_traces || !queries.empty() || !diagnostics.list.empty() ||
           prune_mode == PruneMode::Default ||
           (prune_mode != PruneMode::None && prune_audit);
}

RunConfig config_from_json(const nlohmann::json& tree) {
    if (!tree.is_object()) throw ConfigError("config root must be a table");
    RunConfig cfg;

    const auto* model = find(tree, "model");
    if (model == nullptr || !model->is_object())
        throw ConfigError("missing [model] table");
    const auto* off = find(*model, "offspring");
    if (off == nullptr || !off->is_object())
        throw ConfigError("missing [model.offspring] table");
    const auto* probs = find(*off, "probabilities");
    if (probs == nullptr || !probs->is_object() || probs->empty())
        throw ConfigError("model.offspring.probabilities must map index -> decimal string");
    for (const auto& [key, val] : probs->items()) {
        int idx = 0;
        const auto res = std::from_chars(key.data(), key.data() + key.size(), idx);
        if (res.ec != std::errc() || res.ptr != key.data() + key.size())
            throw ConfigError("offspring index '" + key + "' is not an integer");
        if (!val.is_string())
            throw ConfigError("offspring probabilities must be decimal strings");
        cfg.offspring_pmf.emplace_back(idx, parse_decimal(val.get<std::string>()));
    }
    const auto* inc = find(*model, "increment");
    if (inc == nullptr || !inc->is_object())
        throw ConfigError("missing [model.increment] table");
    cfg.increment = build_increment(*inc);

    const auto* run = find(tree, "run");
    if (run == nullptr || !run->is_object()) throw ConfigError("missing [run] table");
    cfg.horizon = static_cast<int>(require_int(*run, "horizon", "run"));
    if (cfg.horizon < 0) throw ConfigError("run.horizon must be >= 0");
    const auto reps = require_int(*run, "replicates", "run");
    if (reps < 1) throw ConfigError("run.replicates must be >= 1");
    cfg.replicates = static_cast<std::size_t>(reps);
    cfg.seed = static_cast<std::uint64_t>(optional_int(*run, "seed", 0, "run"));
    cfg.workers = static_cast<int>(optional_int(*run, "workers", 1, "run"));
    if (cfg.workers < 1) throw ConfigError("run.workers must be >= 1");
    if (const auto* out = find(*run, "out")) {
        if (!out->is_string()) throw ConfigError("run.out must be a string");
        cfg.out_dir = out->get<std::string>();
    }

    if (const auto* prune = find(tree, "prune")) {
        const std::string mode = require_string(*prune, "mode", "prune");
        cfg.prune_audit = optional_bool(*prune, "audit", true, "prune");
        if (mode == "none") {
            cfg.prune_mode = RunConfig::PruneMode::None;
        } else if (mode == "default") {
            cfg.prune_mode = RunConfig::PruneMode::Default;
        } else if (mode == "gap_below_max") {
            cfg.prune_mode = RunConfig::PruneMode::Gap;
            cfg.prune_gap = require_decimal(*prune, "gap", "prune");
        } else if (mode == "below_line") {
            cfg.prune_mode = RunConfig::PruneMode::Line;
            cfg.prune_slope = require_decimal(*prune, "slope", "prune");
            cfg.prune_offset = require_decimal(*prune, "offset", "prune");
        } else {
            throw ConfigError("prune.mode '" + mode + "' is not recognised");
        }
    }

    if (const auto* rec = find(tree, "record")) {
        cfg.record_traces = optional_bool(*rec, "traces", false, "record");
        cfg.traces_upto =
            static_cast<int>(optional_int(*rec, "traces_upto", -1, "record"));
        cfg.retain_genealogy = optional_bool(*rec, "genealogy", false, "record");
    }

    if (const auto* queries = find(tree, "queries")) {
        if (!queries->is_array()) throw ConfigError("[[queries]] must be a table array");
        for (const auto& q : *queries) {
            QueryConfig qc;
            const std::string family = require_string(q, "family", "queries");
            if (family == "gbeta") {
                qc.family = BarrierEventQuery::Family::GBeta;
                qc.z = require_decimal(q, "beta", "queries");
            } else {
                if (family == "e") qc.family = BarrierEventQuery::Family::E;
                else if (family == "f") qc.family = BarrierEventQuery::Family::F;
                else if (family == "gn") qc.family = BarrierEventQuery::Family::Gn;
                else throw ConfigError("query family '" + family + "' is not recognised");
                qc.z = require_decimal(q, "z", "queries");
                qc.ell = static_cast<int>(optional_int(q, "ell", 0, "queries"));
            }
            cfg.queries.push_back(qc);
        }
    }

    if (const auto* diag = find(tree, "diagnostics")) {
        auto& d = cfg.diagnostics;
        if (const auto* list = find(*diag, "list")) {
            if (!list->is_array()) throw ConfigError("diagnostics.list must be an array");
            for (const auto& item : *list) {
                if (!item.is_string())
                    throw ConfigError("diagnostics.list entries must be strings");
                d.list.push_back(item.get<std::string>());
            }
        }
        if (const auto* tz = find(*diag, "tail_z")) {
            if (!tz->is_array()) throw ConfigError("diagnostics.tail_z must be an array");
            d.tail_z.clear();
            for (const auto& item : *tz) {
                if (!item.is_string())
                    throw ConfigError("diagnostics.tail_z entries must be decimal strings");
                d.tail_z.push_back(parse_decimal(item.get<std::string>()));
            }
        }
        d.z_probe = optional_decimal(*diag, "z_probe", d.z_probe, "diagnostics");
        d.mixture_k = static_cast<int>(
            optional_int(*diag, "mixture_k", d.mixture_k, "diagnostics"));
        d.bins = static_cast<int>(optional_int(*diag, "bins", d.bins, "diagnostics"));
        d.theta_tolerance =
            optional_decimal(*diag, "theta_tolerance", d.theta_tolerance, "diagnostics");
        d.tightness_factor = optional_decimal(*diag, "tightness_factor",
                                              d.tightness_factor, "diagnostics");
        d.delta = optional_decimal(*diag, "delta", d.delta, "diagnostics");
        d.ratio_bound =
            optional_decimal(*diag, "ratio_bound", d.ratio_bound, "diagnostics");
    }

    // Validate the model eagerly so schema errors surface before any run.
    cfg.offspring();
    cfg.query_set();

    cfg.canonical = tree;
    cfg.hash_hex = sha256_hex(tree.dump());
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) throw ConfigError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return config_from_json(parse_toml_subset(text));
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

}  // namespace brw
