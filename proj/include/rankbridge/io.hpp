#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rankbridge/completion.hpp"
#include "rankbridge/errors.hpp"
#include "rankbridge/fields.hpp"
#include "rankbridge/tensor.hpp"

namespace rankbridge {

/// Structured problem input: a partially known tensor plus either a list of
/// unknown positions (matrix completion) or an explicit list of pure
/// generators (affine-space mode). All values travel as field-formatted
/// strings; positions are 1-based as in written mathematics.
struct ProblemFile {
    struct Entry {
        std::vector<std::size_t> pos;
        std::string value;
    };

    std::string version = "1";
    FieldSpec field = FieldSpec::rational();
    std::vector<std::size_t> shape;
    std::vector<Entry> entries;
    std::optional<std::vector<std::vector<std::size_t>>> unknowns;
    std::optional<std::vector<std::vector<std::vector<std::string>>>> generators;
};

/// Optional provenance block on a serialized tensor: which lift produced it
/// and from what base shape, so downstream commands can interpret the slots.
struct LiftInfo {
    std::string variant; // "hat" or "tilde"
    std::size_t s = 0;
    std::vector<std::size_t> base_shape;
};

/// Serialized dense tensor: shape plus row-major, field-formatted values.
struct TensorFile {
    std::string version = "1";
    FieldSpec field = FieldSpec::rational();
    std::vector<std::size_t> shape;
    std::vector<std::string> values;
    std::optional<LiftInfo> lift;
};

namespace detail {

/// 64-bit FNV-1a over raw bytes; digests pin reports to their inputs.
inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf, 16);
}

} // namespace detail

/// Digest string for an input blob, embedded in every report.
inline std::string input_digest(std::string_view bytes) {
    return "fnv1a64:" + detail::hex64(detail::fnv1a64(bytes));
}

/// The one true serialization: sorted keys, two-space indent, trailing
/// newline. Shapes and positions are JSON integers; every field element is a
/// string in the field's canonical print form, so dumps are byte-stable.
inline std::string canonical_dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

/// Writes `content` to `path` atomically (temp file + rename).
inline void atomic_write(const std::filesystem::path& path, std::string_view content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ValidationError("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), std::streamsize(content.size()));
        if (!out) throw ValidationError("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string() + " for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

namespace detail {

inline const nlohmann::json& require_key(const nlohmann::json& j, const std::string& key,
                                          const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) throw ValidationError(where + ": missing required key \"" + key + "\"");
    return *it;
}

inline std::vector<std::size_t> parse_index_list(const nlohmann::json& j,
                                                 const std::string& where) {
    if (!j.is_array() || j.empty())
        throw ValidationError(where + ": expected a non-empty array of positive integers");
    std::vector<std::size_t> out;
    out.reserve(j.size());
    for (std::size_t k = 0; k < j.size(); ++k) {
        const auto& v = j[k];
        if (!v.is_number_unsigned() || v.get<std::uint64_t>() == 0)
            throw ValidationError(where + "[" + std::to_string(k) +
                                  "]: expected a positive integer");
        out.push_back(v.get<std::size_t>());
    }
    return out;
}

inline void check_position(const std::vector<std::size_t>& pos,
                           const std::vector<std::size_t>& shape, const std::string& where) {
    if (pos.size() != shape.size())
        throw ValidationError(where + ": position has " + std::to_string(pos.size()) +
                              " indices but the shape has " + std::to_string(shape.size()) +
                              " modes");
    for (std::size_t k = 0; k < pos.size(); ++k)
        if (pos[k] < 1 || pos[k] > shape[k])
            throw ValidationError(where + "[" + std::to_string(k) + "]: index " +
                                  std::to_string(pos[k]) + " outside [1, " +
                                  std::to_string(shape[k]) + "]");
}

/// Checks that `text` parses as an element of the declared field.
inline void probe_value(const FieldSpec& spec, const std::string& text,
                        const std::string& where) {
    try {
        with_field(spec, [&](const auto& f) { (void)f.parse(text); });
    } catch (const Error& e) {
        throw ValidationError(where + ": " + e.what());
    }
}

inline std::string version_of(const nlohmann::json& j, const std::string& where) {
    const auto& v = require_key(j, "version", where);
    if (!v.is_string() || v.get<std::string>() != "1")
        throw ValidationError(where + ": unsupported version (expected \"1\")");
    return "1";
}

} // namespace detail

inline nlohmann::json to_json(const ProblemFile& p) {
    nlohmann::json j;
    j["version"] = p.version;
    j["field"] = p.field.designator();
    j["shape"] = p.shape;
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : p.entries) entries.push_back({{"pos", e.pos}, {"value", e.value}});
    j["entries"] = std::move(entries);
    if (p.unknowns) j["unknowns"] = *p.unknowns;
    if (p.generators) j["generators"] = *p.generators;
    return j;
}

inline ProblemFile parse_problem(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("problem file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ValidationError("problem file: expected a JSON object");

    ProblemFile p;
    p.version = detail::version_of(j, "problem file");

    const auto& fld = detail::require_key(j, "field", "problem file");
    if (!fld.is_string()) throw ValidationError("field: expected a designator string");
    p.field = FieldSpec::parse(fld.get<std::string>());

    p.shape = detail::parse_index_list(detail::require_key(j, "shape", "problem file"), "shape");

    const auto& entries = detail::require_key(j, "entries", "problem file");
    if (!entries.is_array()) throw ValidationError("entries: expected an array");
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const std::string where = "entries[" + std::to_string(i) + "]";
        const auto& e = entries[i];
        if (!e.is_object()) throw ValidationError(where + ": expected an object");
        ProblemFile::Entry out;
        out.pos = detail::parse_index_list(detail::require_key(e, "pos", where), where + ".pos");
        detail::check_position(out.pos, p.shape, where + ".pos");
        const auto& val = detail::require_key(e, "value", where);
        if (!val.is_string()) throw ValidationError(where + ".value: expected a string");
        out.value = val.get<std::string>();
        detail::probe_value(p.field, out.value, where + ".value");
        p.entries.push_back(std::move(out));
    }

    const bool has_unknowns = j.contains("unknowns");
    const bool has_generators = j.contains("generators");
    if (has_unknowns == has_generators)
        throw ValidationError("problem file: exactly one of \"unknowns\"/\"generators\" must "
                              "be present");

    if (has_unknowns) {
        const auto& u = j["unknowns"];
        if (!u.is_array()) throw ValidationError("unknowns: expected an array");
        std::vector<std::vector<std::size_t>> list;
        for (std::size_t i = 0; i < u.size(); ++i) {
            const std::string where = "unknowns[" + std::to_string(i) + "]";
            auto pos = detail::parse_index_list(u[i], where);
            detail::check_position(pos, p.shape, where);
            list.push_back(std::move(pos));
        }
        p.unknowns = std::move(list);
    } else {
        const auto& g = j["generators"];
        if (!g.is_array()) throw ValidationError("generators: expected an array");
        std::vector<std::vector<std::vector<std::string>>> list;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const std::string gwhere = "generators[" + std::to_string(i) + "]";
            const auto& gen = g[i];
            if (!gen.is_array() || gen.size() != p.shape.size())
                throw ValidationError(gwhere + ": expected one factor per mode (" +
                                      std::to_string(p.shape.size()) + " modes)");
            std::vector<std::vector<std::string>> factors;
            for (std::size_t k = 0; k < gen.size(); ++k) {
                const std::string fwhere = gwhere + "[" + std::to_string(k) + "]";
                const auto& fac = gen[k];
                if (!fac.is_array() || fac.size() != p.shape[k])
                    throw ValidationError(fwhere + ": expected " + std::to_string(p.shape[k]) +
                                          " coordinates");
                std::vector<std::string> coords;
                for (std::size_t c = 0; c < fac.size(); ++c) {
                    const auto& v = fac[c];
                    if (!v.is_string())
                        throw ValidationError(fwhere + "[" + std::to_string(c) +
                                              "]: expected a string");
                    coords.push_back(v.get<std::string>());
                    detail::probe_value(p.field, coords.back(),
                                        fwhere + "[" + std::to_string(c) + "]");
                }
                factors.push_back(std::move(coords));
            }
            list.push_back(std::move(factors));
        }
        p.generators = std::move(list);
    }
    return p;
}

inline std::string serialize_problem(const ProblemFile& p) { return canonical_dump(to_json(p)); }

inline nlohmann::json to_json(const TensorFile& t) {
    nlohmann::json j;
    j["version"] = t.version;
    j["field"] = t.field.designator();
    j["shape"] = t.shape;
    j["values"] = t.values;
    if (t.lift) {
        j["lift"] = {{"variant", t.lift->variant},
                     {"s", t.lift->s},
                     {"base_shape", t.lift->base_shape}};
    }
    return j;
}

inline TensorFile parse_tensor_file(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("tensor file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ValidationError("tensor file: expected a JSON object");

    TensorFile t;
    t.version = detail::version_of(j, "tensor file");
    const auto& fld = detail::require_key(j, "field", "tensor file");
    if (!fld.is_string()) throw ValidationError("field: expected a designator string");
    t.field = FieldSpec::parse(fld.get<std::string>());
    t.shape = detail::parse_index_list(detail::require_key(j, "shape", "tensor file"), "shape");

    std::size_t expect = 1;
    for (std::size_t d : t.shape) expect *= d;
    const auto& vals = detail::require_key(j, "values", "tensor file");
    if (!vals.is_array() || vals.size() != expect)
        throw ValidationError("values: expected " + std::to_string(expect) +
                              " row-major entries");
    for (std::size_t i = 0; i < vals.size(); ++i) {
        const std::string where = "values[" + std::to_string(i) + "]";
        if (!vals[i].is_string()) throw ValidationError(where + ": expected a string");
        t.values.push_back(vals[i].get<std::string>());
        detail::probe_value(t.field, t.values.back(), where);
    }

    if (j.contains("lift")) {
        const auto& l = j["lift"];
        if (!l.is_object()) throw ValidationError("lift: expected an object");
        LiftInfo info;
        const auto& variant = detail::require_key(l, "variant", "lift");
        if (!variant.is_string() ||
            (variant.get<std::string>() != "hat" && variant.get<std::string>() != "tilde"))
            throw ValidationError("lift.variant: expected \"hat\" or \"tilde\"");
        info.variant = variant.get<std::string>();
        const auto& s = detail::require_key(l, "s", "lift");
        if (!s.is_number_unsigned()) throw ValidationError("lift.s: expected an integer");
        info.s = s.get<std::size_t>();
        info.base_shape =
            detail::parse_index_list(detail::require_key(l, "base_shape", "lift"),
                                     "lift.base_shape");
        t.lift = std::move(info);
    }
    return t;
}

inline std::string serialize_tensor_file(const TensorFile& t) {
    return canonical_dump(to_json(t));
}

/// Typed view of a tensor file in a concrete field.
template <FieldType F>
DenseTensor<F> to_tensor(const F& field, const TensorFile& t) {
    DenseTensor<F> out(field, t.shape);
    for (std::size_t i = 0; i < t.values.size(); ++i) out[i] = field.parse(t.values[i]);
    return out;
}

template <FieldType F>
TensorFile from_tensor(const F& field, const DenseTensor<F>& t,
                       std::optional<LiftInfo> lift = std::nullopt) {
    TensorFile out;
    out.field = field.spec();
    out.shape = t.shape();
    out.values.reserve(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) out.values.push_back(field.to_string(t[i]));
    out.lift = std::move(lift);
    return out;
}

/// Typed view of a problem file when the unknowns form a partial matrix.
template <FieldType F>
PartialMatrix<F> to_partial_matrix(const F& field, const ProblemFile& p) {
    if (!p.unknowns)
        throw ValidationError("problem is in generator mode, not a partial matrix");
    if (p.shape.size() != 2)
        throw ValidationError("unknown-position mode needs an order-2 shape, got order " +
                              std::to_string(p.shape.size()));
    PartialMatrix<F> out;
    out.rows = p.shape[0];
    out.cols = p.shape[1];
    for (const auto& e : p.entries) {
        if (!out.known.emplace(Position{e.pos[0], e.pos[1]}, field.parse(e.value)).second)
            throw ValidationError("entry position (" + std::to_string(e.pos[0]) + "," +
                                  std::to_string(e.pos[1]) + ") listed twice");
    }
    for (const auto& pos : *p.unknowns) out.unknowns.push_back({pos[0], pos[1]});
    out.validate();
    return out;
}

/// Typed affine space for either problem mode.
template <FieldType F>
AffineTensorSpace<F> to_space(const F& field, const ProblemFile& p) {
    if (p.unknowns) return to_affine_space(field, to_partial_matrix(field, p));

    DenseTensor<F> base(field, p.shape);
    std::vector<bool> filled(base.size(), false);
    for (const auto& e : p.entries) {
        std::vector<std::size_t> idx = e.pos; // 1-based in files, 0-based in storage
        for (std::size_t& v : idx) --v;
        const std::size_t off = base.offset(idx);
        if (filled[off]) {
            std::string pos_text;
            for (std::size_t v : e.pos) pos_text += (pos_text.empty() ? "" : ",") + std::to_string(v);
            throw ValidationError("entry position (" + pos_text + ") listed twice");
        }
        filled[off] = true;
        base[off] = field.parse(e.value);
    }
    std::vector<PureTensor<F>> gens;
    for (const auto& g : *p.generators) {
        PureTensor<F> pure;
        for (const auto& fac : g) {
            std::vector<typename F::Value> coords;
            coords.reserve(fac.size());
            for (const auto& c : fac) coords.push_back(field.parse(c));
            pure.factors.push_back(std::move(coords));
        }
        gens.push_back(std::move(pure));
    }
    return AffineTensorSpace<F>(std::move(base), std::move(gens));
}

} // namespace rankbridge
