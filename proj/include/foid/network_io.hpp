#pragma once

// Network file reader. The format is YAML with the sections `bases`,
// `limits`, `transformer`, `buses` and `lines`; see data/builtin_18bus.yaml
// and the README for the annotated schema.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <yaml-cpp/yaml.h>

#include "foid/error.hpp"
#include "foid/netmodel.hpp"

namespace foid {

namespace detail {

inline int yaml_line(const YAML::Node& node) {
    const auto mark = node.Mark();
    return mark.line >= 0 ? mark.line + 1 : 0;
}

template <typename T>
T yaml_get(const YAML::Node& parent, const std::string& key, const std::string& path) {
    const YAML::Node node = parent[key];
    if (!node) throw ParseError("missing required field", yaml_line(parent), path + key);
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        throw ParseError("invalid value '" + YAML::Dump(node) + "'", yaml_line(node), path + key);
    }
}

template <typename T>
T yaml_get_or(const YAML::Node& parent, const std::string& key, const std::string& path, T fallback) {
    if (!parent || !parent[key]) return fallback;
    return yaml_get<T>(parent, key, path);
}

inline YAML::Node yaml_section(const YAML::Node& root, const std::string& key, bool required = true) {
    const YAML::Node node = root[key];
    if (!node && required) throw ParseError("missing section", yaml_line(root), key);
    if (node && !node.IsMap() && !node.IsSequence())
        throw ParseError("section must be a map or list", yaml_line(node), key);
    return node;
}

inline BusKind parse_bus_kind(const YAML::Node& node, const std::string& path) {
    const auto text = yaml_get<std::string>(node, "kind", path);
    if (text == "slack") return BusKind::slack;
    if (text == "pole") return BusKind::pole;
    if (text == "household") return BusKind::household;
    throw ParseError("unknown bus kind '" + text + "'", yaml_line(node["kind"]), path + "kind");
}

inline YAML::Node yaml_load_string(const std::string& text) {
    try {
        return YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ParseError(e.msg, e.mark.line >= 0 ? e.mark.line + 1 : 0);
    }
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace detail

/// Parses and validates a network description.
inline NetworkModel parse_network(const std::string& text) {
    using namespace detail;
    const YAML::Node root = yaml_load_string(text);
    if (!root || !root.IsMap()) throw ParseError("network file must be a YAML map", 1);

    NetworkModel net;
    const auto bases = yaml_section(root, "bases");
    net.bases.s_base_kva = yaml_get<double>(bases, "s_base", "bases.");
    net.bases.v_base_v = yaml_get<double>(bases, "v_base", "bases.");
    net.frequency_hz = yaml_get_or<double>(bases, "frequency", "bases.", 50.0);

    const auto limits = yaml_section(root, "limits");
    net.v_nom = yaml_get<double>(limits, "v_nom", "limits.");
    net.v_min = yaml_get<double>(limits, "v_min", "limits.");
    net.v_max = yaml_get<double>(limits, "v_max", "limits.");

    const auto tx = yaml_section(root, "transformer");
    net.transformer_s_max_kva = yaml_get<double>(tx, "transformer_s_max", "transformer.");

    if (const auto opts = yaml_section(root, "options", false))
        net.include_shunts = yaml_get_or<bool>(opts, "include_shunts", "options.", false);

    const auto buses = yaml_section(root, "buses");
    if (!buses.IsSequence()) throw ParseError("must be a list", yaml_line(buses), "buses");
    for (std::size_t i = 0; i < buses.size(); ++i) {
        const auto& node = buses[i];
        const std::string path = "buses[" + std::to_string(i) + "].";
        Bus b;
        b.id = yaml_get<int>(node, "id", path);
        b.kind = parse_bus_kind(node, path);
        b.load_p_kw = yaml_get_or<double>(node, "load_p", path, 0.0);
        b.load_q_kvar = yaml_get_or<double>(node, "load_q", path, 0.0);
        net.buses.push_back(b);
    }

    const auto lines = yaml_section(root, "lines");
    if (!lines.IsSequence()) throw ParseError("must be a list", yaml_line(lines), "lines");
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto& node = lines[i];
        const std::string path = "lines[" + std::to_string(i) + "].";
        Line l;
        l.from = yaml_get<int>(node, "from", path);
        l.to = yaml_get<int>(node, "to", path);
        l.length_km = yaml_get<double>(node, "length", path);
        l.r_ohm_per_km = yaml_get<double>(node, "r_per_km", path);
        l.l_mh_per_km = yaml_get_or<double>(node, "l_per_km", path, 0.0);
        l.c_uf_per_km = yaml_get_or<double>(node, "c_per_km", path, 0.0);
        if (node["i_max"]) {
            const auto& im = node["i_max"];
            if (!(im.IsScalar() && im.Scalar() == "none")) l.i_max_a = yaml_get<double>(node, "i_max", path);
        }
        net.lines.push_back(l);
    }

    validate(net);
    return net;
}

inline NetworkModel load_network(const std::filesystem::path& path) {
    const std::string text = detail::read_text_file(path);
    try {
        return parse_network(text);
    } catch (const ParseError& e) {
        throw e.with_prefix(path.string());
    }
}

}  // namespace foid
