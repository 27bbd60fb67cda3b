#include "sizer/netlist.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "sizer/error.hpp"

namespace sizer {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

struct LogicalLine {
  std::size_t number;
  std::string text;
};

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> raw;
  std::istringstream in(text);
  for (std::string tok; in >> tok;) raw.push_back(tok);
  // Glue "W = 2u", "W= 2u" and "W =2u" into "W=2u".
  std::vector<std::string> out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    std::string tok = raw[i];
    if (tok == "=" && !out.empty() && i + 1 < raw.size()) {
      out.back() += "=" + raw[++i];
      continue;
    }
    if (tok.front() == '=' && !out.empty()) {
      out.back() += tok;
      continue;
    }
    if (tok.back() == '=' && i + 1 < raw.size()) tok += raw[++i];
    out.push_back(tok);
  }
  return out;
}

constexpr std::array<std::pair<std::string_view, int>, 8> kSuffixes{{
    {"meg", 6}, {"f", -15}, {"p", -12}, {"n", -9}, {"u", -6}, {"m", -3}, {"k", 3}, {"g", 9}}};

class NetTable {
 public:
  const std::string& intern(const std::string& name) {
    auto key = lower(name);
    auto [it, inserted] = names_.try_emplace(key, name);
    return it->second;
  }

 private:
  std::unordered_map<std::string, std::string> names_;
};

ParamValue parse_value(const std::string& token, std::size_t line) {
  if (auto v = parse_si_number(token)) {
    if (!std::isfinite(*v)) throw SyntaxError(line, "non-finite value '" + token + "'");
    return ParamValue::literal(*v);
  }
  if (is_identifier(token)) return ParamValue::symbol(token);
  throw SyntaxError(line, "cannot parse value '" + token + "'");
}

void require_positive(const ParamValue& v, const std::string& what, std::size_t line) {
  if (!v.is_symbol() && !(v.literal_value() > 0.0))
    throw SyntaxError(line, what + " must be positive");
}

DeviceKind mos_polarity(const std::string& model, std::size_t line) {
  std::size_t i = 0;
  while (i < model.size() && std::isdigit(static_cast<unsigned char>(model[i]))) ++i;
  if (i < model.size()) {
    char c = static_cast<char>(std::tolower(static_cast<unsigned char>(model[i])));
    if (c == 'n') return DeviceKind::Nmos;
    if (c == 'p') return DeviceKind::Pmos;
  }
  throw SyntaxError(line, "cannot infer MOS polarity from model '" + model + "'");
}

Device parse_mos(const std::vector<std::string>& toks, std::size_t line, NetTable& nets) {
  std::vector<std::string> positional;
  std::vector<std::pair<std::string, std::string>> assigns;
  for (std::size_t i = 1; i < toks.size(); ++i) {
    auto eq = toks[i].find('=');
    if (eq == std::string::npos) {
      if (!assigns.empty()) throw SyntaxError(line, "positional token '" + toks[i] + "' after parameters");
      positional.push_back(toks[i]);
    } else {
      if (eq == 0 || eq + 1 == toks[i].size()) throw SyntaxError(line, "malformed parameter '" + toks[i] + "'");
      assigns.emplace_back(upper(toks[i].substr(0, eq)), toks[i].substr(eq + 1));
    }
  }
  if (positional.size() != 4 && positional.size() != 5)
    throw SyntaxError(line, "MOS card needs 3 or 4 nets followed by a model name");

  Device dev;
  dev.name = toks[0];
  dev.model = positional.back();
  dev.kind = mos_polarity(dev.model, line);
  const std::string& d = nets.intern(positional[0]);
  const std::string& g = nets.intern(positional[1]);
  const std::string& s = nets.intern(positional[2]);
  // Three-net shorthand: bulk defaults to source.
  const std::string& b = positional.size() == 5 ? nets.intern(positional[3]) : s;
  dev.terminals = {{TerminalRole::D, d}, {TerminalRole::G, g}, {TerminalRole::S, s}, {TerminalRole::B, b}};

  for (auto& [key, text] : assigns) {
    if (dev.params.count(key)) throw SyntaxError(line, "parameter " + key + " given twice");
    ParamValue v = parse_value(text, line);
    if (key == "W" || key == "L") require_positive(v, key, line);
    if (key == "M" && !v.is_symbol()) {
      double m = v.literal_value();
      if (!(m >= 1.0) || std::floor(m) != m) throw SyntaxError(line, "M must be a positive integer");
    }
    dev.params.emplace(key, v);
  }
  if (!dev.params.count("W")) throw SyntaxError(line, "MOS card is missing W=");
  if (!dev.params.count("L")) throw SyntaxError(line, "MOS card is missing L=");
  return dev;
}

Device parse_two_terminal(const std::vector<std::string>& toks, DeviceKind kind, std::size_t line,
                          NetTable& nets) {
  std::vector<std::string> rest(toks.begin() + 1, toks.end());
  bool source = kind == DeviceKind::CurrentSource || kind == DeviceKind::VoltageSource;
  if (source && rest.size() == 4 && lower(rest[2]) == "dc") rest.erase(rest.begin() + 2);
  if (rest.size() != 3) throw SyntaxError(line, "expected '<name> <n1> <n2> <value>'");
  Device dev;
  dev.name = toks[0];
  dev.kind = kind;
  dev.terminals = {{TerminalRole::P, nets.intern(rest[0])}, {TerminalRole::N, nets.intern(rest[1])}};
  ParamValue v = parse_value(rest[2], line);
  if (!source) require_positive(v, std::string(to_string(kind)) + " value", line);
  dev.params.emplace("value", v);
  return dev;
}

std::vector<LogicalLine> logical_lines(std::string_view text, std::string& title) {
  std::vector<LogicalLine> out;
  std::size_t number = 0;
  bool first_content = true;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++number;
    std::string line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '*') {
      if (first_content) title = trim(std::string_view(line).substr(1));
      first_content = false;
      continue;
    }
    first_content = false;
    if (auto semi = line.find(';'); semi != std::string::npos) line = trim(std::string_view(line).substr(0, semi));
    if (line.empty()) continue;
    if (line.front() == '+') {
      if (out.empty()) throw SyntaxError(number, "continuation line without a preceding card");
      out.back().text += " " + line.substr(1);
      continue;
    }
    out.push_back({number, line});
  }
  return out;
}

}  // namespace

std::string_view to_string(DeviceKind kind) {
  switch (kind) {
    case DeviceKind::Nmos: return "NMOS";
    case DeviceKind::Pmos: return "PMOS";
    case DeviceKind::Resistor: return "R";
    case DeviceKind::Capacitor: return "C";
    case DeviceKind::CurrentSource: return "I";
    case DeviceKind::VoltageSource: return "V";
  }
  return "?";
}

std::string_view to_string(TerminalRole role) {
  switch (role) {
    case TerminalRole::D: return "D";
    case TerminalRole::G: return "G";
    case TerminalRole::S: return "S";
    case TerminalRole::B: return "B";
    case TerminalRole::P: return "P";
    case TerminalRole::N: return "N";
  }
  return "?";
}

bool is_mos(DeviceKind kind) noexcept { return kind == DeviceKind::Nmos || kind == DeviceKind::Pmos; }

std::string ParamValue::to_text() const {
  if (is_symbol()) return symbol_name();
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), literal_value());
  return std::string(buf.data(), end);
}

const std::string& Device::net(TerminalRole role) const {
  for (const auto& t : terminals)
    if (t.role == role) return t.net;
  throw Error("device " + name + " has no terminal " + std::string(to_string(role)));
}

const Device* Netlist::find(std::string_view device_name) const {
  for (const auto& d : devices)
    if (d.name == device_name) return &d;
  return nullptr;
}

bool equivalent(const Netlist& a, const Netlist& b) {
  if (a.nets != b.nets || a.ground != b.ground || a.supply != b.supply) return false;
  if (a.devices.size() != b.devices.size()) return false;
  auto sorted = [](std::vector<Device> v) {
    std::sort(v.begin(), v.end(), [](const Device& x, const Device& y) { return x.name < y.name; });
    return v;
  };
  return sorted(a.devices) == sorted(b.devices);
}

bool is_identifier(std::string_view token) noexcept {
  if (token.empty()) return false;
  auto c0 = static_cast<unsigned char>(token[0]);
  if (!(std::isalpha(c0) || c0 == '_')) return false;
  return std::all_of(token.begin() + 1, token.end(), [](char c) {
    auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || u == '_';
  });
}

std::optional<double> parse_si_number(std::string_view token) {
  std::size_t i = 0;
  const std::size_t n = token.size();
  std::string mantissa;
  if (i < n && (token[i] == '+' || token[i] == '-')) mantissa += token[i++];
  std::size_t digits = 0;
  while (i < n && std::isdigit(static_cast<unsigned char>(token[i]))) mantissa += token[i++], ++digits;
  if (i < n && token[i] == '.') {
    mantissa += token[i++];
    while (i < n && std::isdigit(static_cast<unsigned char>(token[i]))) mantissa += token[i++], ++digits;
  }
  if (digits == 0) return std::nullopt;
  long exponent = 0;
  if (i < n && (token[i] == 'e' || token[i] == 'E')) {
    std::size_t j = i + 1;
    int sign = 1;
    if (j < n && (token[j] == '+' || token[j] == '-')) sign = token[j++] == '-' ? -1 : 1;
    std::size_t start = j;
    long e = 0;
    while (j < n && std::isdigit(static_cast<unsigned char>(token[j]))) e = e * 10 + (token[j++] - '0');
    if (j > start) {
      exponent = sign * e;
      i = j;
    }
  }
  if (i < n) {
    std::string rest = lower(token.substr(i));
    bool matched = false;
    for (auto [suffix, scale] : kSuffixes) {
      if (rest == suffix) {
        exponent += scale;
        matched = true;
        break;
      }
    }
    if (!matched) return std::nullopt;
  }
  // Let the decimal conversion apply the scale so the result is correctly rounded.
  std::string composed = mantissa + "e" + std::to_string(exponent);
  double value = 0.0;
  const char* first = composed.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, composed.data() + composed.size(), value);
  if (ec == std::errc::result_out_of_range) return HUGE_VAL;
  if (ec != std::errc() || ptr != composed.data() + composed.size()) return std::nullopt;
  return value;
}

Netlist parse_netlist(std::string_view text) {
  Netlist out;
  NetTable nets;
  std::set<std::string> seen_names;
  for (const auto& [line, content] : logical_lines(text, out.title)) {
    auto toks = tokenize(content);
    if (toks.empty()) continue;
    const std::string& head = toks[0];
    if (head.front() == '.') {
      std::string card = lower(head);
      if (card == ".end") break;
      if (card == ".title") {
        out.title = trim(std::string_view(content).substr(head.size()));
        continue;
      }
      if (card == ".subckt" || card == ".ends")
        throw SyntaxError(line, "hierarchical .subckt definitions are not supported; supply a flat netlist");
      throw SyntaxError(line, "unsupported control card '" + head + "'");
    }
    char prefix = static_cast<char>(std::toupper(static_cast<unsigned char>(head.front())));
    Device dev;
    switch (prefix) {
      case 'M': dev = parse_mos(toks, line, nets); break;
      case 'R': dev = parse_two_terminal(toks, DeviceKind::Resistor, line, nets); break;
      case 'C': dev = parse_two_terminal(toks, DeviceKind::Capacitor, line, nets); break;
      case 'I': dev = parse_two_terminal(toks, DeviceKind::CurrentSource, line, nets); break;
      case 'V': dev = parse_two_terminal(toks, DeviceKind::VoltageSource, line, nets); break;
      default: throw UnknownDeviceCard(line, std::string(1, head.front()));
    }
    if (!seen_names.insert(lower(dev.name)).second) throw DuplicateDevice(dev.name);
    for (const auto& t : dev.terminals) out.nets.insert(t.net);
    out.devices.push_back(std::move(dev));
  }
  if (!out.devices.empty()) out = resolve_rails(std::move(out));
  return out;
}

Netlist resolve_rails(Netlist netlist, const std::vector<std::string>& ground_names,
                      const std::vector<std::string>& supply_names) {
  auto find_aliases = [&](const std::vector<std::string>& aliases) {
    std::vector<std::string> found;
    for (const auto& alias : aliases)
      for (const auto& net : netlist.nets)
        if (lower(net) == lower(alias) && std::find(found.begin(), found.end(), net) == found.end())
          found.push_back(net);
    return found;
  };
  auto merge_into = [&](const std::vector<std::string>& found) {
    for (std::size_t k = 1; k < found.size(); ++k) {
      netlist.warnings.push_back("net '" + found[k] + "' merged into rail '" + found[0] + "'");
      for (auto& d : netlist.devices)
        for (auto& t : d.terminals)
          if (t.net == found[k]) t.net = found[0];
      netlist.nets.erase(found[k]);
    }
  };

  auto grounds = find_aliases(ground_names);
  if (grounds.empty()) throw MissingGround();
  merge_into(grounds);
  netlist.ground = grounds.front();

  auto supplies = find_aliases(supply_names);
  if (!supplies.empty()) {
    merge_into(supplies);
    netlist.supply = supplies.front();
    return netlist;
  }
  // No supply alias: take the positive net of the highest grounded voltage source.
  const Device* best = nullptr;
  for (const auto& d : netlist.devices) {
    if (d.kind != DeviceKind::VoltageSource || d.net(TerminalRole::N) != netlist.ground) continue;
    const auto& v = d.params.at("value");
    if (v.is_symbol()) continue;
    if (!best || v.literal_value() > best->params.at("value").literal_value()) best = &d;
  }
  if (best && best->params.at("value").literal_value() > 0.0) {
    netlist.supply = best->net(TerminalRole::P);
    netlist.warnings.push_back("no supply alias found; using '" + netlist.supply + "' driven by " + best->name);
  } else {
    netlist.warnings.push_back("no supply net found");
  }
  return netlist;
}

std::string serialize_netlist(const Netlist& netlist) {
  std::ostringstream out;
  if (!netlist.title.empty()) out << "* " << netlist.title << "\n";
  for (const auto& d : netlist.devices) {
    out << d.name;
    if (is_mos(d.kind)) {
      for (auto role : {TerminalRole::D, TerminalRole::G, TerminalRole::S, TerminalRole::B}) out << ' ' << d.net(role);
      out << ' ' << (d.model.empty() ? (d.kind == DeviceKind::Nmos ? "nch" : "pch") : d.model);
      for (const char* key : {"W", "L", "M"})
        if (auto it = d.params.find(key); it != d.params.end()) out << ' ' << key << '=' << it->second.to_text();
      for (const auto& [key, v] : d.params)
        if (key != "W" && key != "L" && key != "M") out << ' ' << key << '=' << v.to_text();
    } else {
      out << ' ' << d.net(TerminalRole::P) << ' ' << d.net(TerminalRole::N) << ' ' << d.params.at("value").to_text();
    }
    out << "\n";
  }
  out << ".end\n";
  return out.str();
}

}  // namespace sizer
