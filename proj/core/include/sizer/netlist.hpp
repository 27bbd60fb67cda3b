#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace sizer {

enum class DeviceKind { Nmos, Pmos, Resistor, Capacitor, CurrentSource, VoltageSource };

/// Terminal roles: D/G/S/B for MOS devices, P/N for two-terminal elements.
enum class TerminalRole { D, G, S, B, P, N };

std::string_view to_string(DeviceKind kind);
std::string_view to_string(TerminalRole role);
bool is_mos(DeviceKind kind) noexcept;

/// A device parameter: either an SI-scaled literal or a reference to a design variable.
class ParamValue {
 public:
  ParamValue() = default;
  static ParamValue literal(double v) { return ParamValue(v); }
  static ParamValue symbol(std::string name) { return ParamValue(Symbol{std::move(name)}); }

  bool is_symbol() const noexcept { return std::holds_alternative<Symbol>(value_); }
  double literal_value() const { return std::get<double>(value_); }
  const std::string& symbol_name() const { return std::get<Symbol>(value_).name; }

  /// Shortest text that reparses to the same value.
  std::string to_text() const;

  friend bool operator==(const ParamValue&, const ParamValue&) = default;

 private:
  struct Symbol {
    std::string name;
    friend bool operator==(const Symbol&, const Symbol&) = default;
  };
  explicit ParamValue(double v) : value_(v) {}
  explicit ParamValue(Symbol s) : value_(std::move(s)) {}

  std::variant<double, Symbol> value_{0.0};
};

struct Terminal {
  TerminalRole role;
  std::string net;
  friend bool operator==(const Terminal&, const Terminal&) = default;
};

struct Device {
  std::string name;
  DeviceKind kind;
  std::vector<Terminal> terminals;  // D,G,S,B for MOS; P,N otherwise
  std::map<std::string, ParamValue> params;
  std::string model;  // MOS model card name, empty otherwise

  const std::string& net(TerminalRole role) const;
  friend bool operator==(const Device&, const Device&) = default;
};

struct Netlist {
  std::string title;
  std::vector<Device> devices;
  std::set<std::string> nets;
  std::string ground;  // canonical ground net, empty until rails are resolved
  std::string supply;  // canonical supply net, may stay empty (see warnings)
  std::vector<std::string> warnings;

  const Device* find(std::string_view device_name) const;
};

/// Value-level equality: devices (order-insensitive), terminals, params, nets and rails.
bool equivalent(const Netlist& a, const Netlist& b);

inline const std::vector<std::string>& default_ground_aliases() {
  static const std::vector<std::string> names{"0", "gnd", "vss"};
  return names;
}
inline const std::vector<std::string>& default_supply_aliases() {
  static const std::vector<std::string> names{"vdd", "vdd!", "vcc"};
  return names;
}

/// Parses a SPICE-subset netlist; resolves rails with the default aliases when
/// at least one device is present.
Netlist parse_netlist(std::string_view text);

/// Tags ground and supply nets. Aliases match case-insensitively; when several
/// aliases of one rail are present they are merged into the first one found.
Netlist resolve_rails(Netlist netlist, const std::vector<std::string>& ground_names = default_ground_aliases(),
                      const std::vector<std::string>& supply_names = default_supply_aliases());

/// Parses `<float>[suffix]` with SI suffixes f,p,n,u,m,k,meg,g.
std::optional<double> parse_si_number(std::string_view token);

/// Writes the netlist back in the accepted grammar.
std::string serialize_netlist(const Netlist& netlist);

bool is_identifier(std::string_view token) noexcept;

}  // namespace sizer
