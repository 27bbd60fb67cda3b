#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#ifndef SIZER_TEST_DATA_DIR
#define SIZER_TEST_DATA_DIR "data"
#endif

namespace oracle {

using namespace sizer;

std::string data_path(const std::string& relative) { return std::string(SIZER_TEST_DATA_DIR) + "/" + relative; }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

const char* pick(Rng& rng, const std::vector<const char*>& v) { return v[rng.index(v.size())]; }

std::string value_token(Rng& rng, const std::vector<const char*>& literals, const std::string& symbol) {
  return rng.uniform() < 0.3 ? symbol : std::string(pick(rng, literals));
}

}  // namespace

std::string random_netlist_text(Rng& rng, const RandomNetlistOptions& opts) {
  std::vector<std::string> pool{"0", "vdd"};
  for (std::size_t i = 1; i <= opts.nets; ++i) pool.push_back("n" + std::to_string(i));
  auto net = [&] { return pool[rng.index(pool.size())]; };

  std::ostringstream out;
  out << "* random circuit\n";
  const std::size_t count = opts.min_devices + rng.index(opts.max_devices - opts.min_devices + 1);
  for (std::size_t i = 1; i <= count; ++i) {
    const double u = rng.uniform();
    if (opts.mos_only || u < 0.5 || i == 1) {
      const bool nmos = i == 1 || rng.uniform() < 0.5;
      out << "M" << i << ' ' << net() << ' ' << net() << ' ' << net();
      if (!opts.three_terminal_mos || i == 1 || rng.uniform() < 0.7) out << ' ' << (nmos ? "0" : "vdd");
      out << ' ' << (nmos ? "nch" : "pch") << " W=" << value_token(rng, {"2u", "1.5u", "10u", "500n"}, "w" + std::to_string(i))
          << " L=" << value_token(rng, {"180n", "1u", "0.5u"}, "l" + std::to_string(i));
      if (rng.uniform() < 0.15) out << " M=" << 1 + rng.index(4);
      out << '\n';
      continue;
    }
    const char* prefix = u < 0.65 ? "R" : u < 0.8 ? "C" : u < 0.9 ? "I" : "V";
    std::string a = net(), b = net();
    while (b == a) b = net();
    std::string v;
    switch (prefix[0]) {
      case 'R': v = value_token(rng, {"10k", "1meg", "470", "2.2k"}, "r" + std::to_string(i)); break;
      case 'C': v = value_token(rng, {"1p", "20f", "0.5p", "3n"}, "c" + std::to_string(i)); break;
      case 'I': v = value_token(rng, {"10u", "5u", "1m"}, "i" + std::to_string(i)); break;
      default: v = pick(rng, {"1.8", "0.9", "1.2"});
    }
    out << prefix << i << ' ' << a << ' ' << b << ' ' << v << '\n';
  }
  out << ".end\n";
  return out.str();
}

GoldenNetlist embed_template(const Template& t, std::size_t copies, Rng& rng) {
  GoldenNetlist g;
  std::ostringstream out;
  out << "* golden " << t.name << "\nVDD vdd 0 1.8\n";
  std::size_t serial = 0;
  std::vector<std::string> ports;
  for (std::size_t k = 1; k <= copies; ++k) {
    const Polarity pol = t.polarities[rng.index(t.polarities.size())];
    const auto devs = t.devices_for(pol);
    std::vector<std::string> members;
    for (const auto& pd : devs) {
      const std::string name = "M" + std::to_string(++serial);
      auto net_of = [&](TerminalRole r) { return "k" + std::to_string(k) + "_" + t.nets[pd.nets.at(r)].label; };
      const bool nmos = pd.kind == NodeKind::Nmos;
      out << name << ' ' << net_of(TerminalRole::D) << ' ' << net_of(TerminalRole::G) << ' ' << net_of(TerminalRole::S)
          << ' ' << (nmos ? "0" : "vdd") << ' ' << (nmos ? "nch" : "pch") << " W=w" << serial << " L=l" << serial << '\n';
      members.push_back(name);
    }
    std::sort(members.begin(), members.end());
    g.golden.insert(members);
    for (const auto& pn : t.nets)
      if (!pn.internal) ports.push_back("k" + std::to_string(k) + "_" + pn.label);
    g.devices += devs.size();
  }
  const std::size_t distractors = rng.index(4);
  for (std::size_t i = 0; i < distractors; ++i) {
    const bool nmos = rng.uniform() < 0.5;
    const std::string name = "M" + std::to_string(++serial);
    out << name << " f" << serial << "d " << ports[rng.index(ports.size())] << " f" << serial << "s "
        << (nmos ? "0 nch" : "vdd pch") << " W=1u L=1u\n";
    ++g.devices;
  }
  const std::size_t context = 1 + rng.index(4);
  std::vector<std::string> context_nets = ports;
  context_nets.push_back("0");
  context_nets.push_back("vdd");
  for (std::size_t i = 0; i < context; ++i) {
    std::string a = context_nets[rng.index(context_nets.size())], b = a;
    while (b == a) b = context_nets[rng.index(context_nets.size())];
    const char* kind = pick(rng, {"R", "C", "I"});
    out << kind << "X" << i << ' ' << a << ' ' << b << ' ' << (kind[0] == 'R' ? "10k" : kind[0] == 'C' ? "1p" : "10u")
        << '\n';
    ++g.devices;
  }
  g.devices += 1;  // supply source
  g.text = out.str();
  return g;
}

std::set<std::vector<std::string>> exhaustive_matches(const Netlist& n, const Template& t) {
  std::vector<const Device*> mos;
  for (const auto& d : n.devices)
    if (d.kind == DeviceKind::Nmos || d.kind == DeviceKind::Pmos) mos.push_back(&d);
  auto lower = [](std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
  };
  auto is_rail = [&](const std::string& net) { return lower(net) == lower(n.ground) || lower(net) == lower(n.supply); };

  std::set<std::vector<std::string>> found;
  for (const Polarity pol : t.polarities) {
    const auto pattern = t.devices_for(pol);
    const std::size_t k = pattern.size();
    std::vector<const Device*> chosen(k, nullptr);
    std::vector<bool> used(mos.size(), false);

    auto check = [&] {
      std::map<std::size_t, std::string> bind;
      std::set<std::string> images;
      for (std::size_t i = 0; i < k; ++i) {
        for (const auto role : {TerminalRole::G, TerminalRole::S, TerminalRole::D}) {
          const std::size_t pn = pattern[i].nets.at(role);
          const std::string cn = lower(chosen[i]->net(role));
          auto it = bind.find(pn);
          if (it == bind.end()) {
            if (!images.insert(cn).second) return false;
            bind[pn] = cn;
          } else if (it->second != cn) {
            return false;
          }
        }
      }
      if (bind.size() != t.nets.size()) return false;
      std::set<std::string> member_names;
      for (auto* d : chosen) member_names.insert(d->name);
      for (std::size_t pn = 0; pn < t.nets.size(); ++pn) {
        const auto& net = bind.at(pn);
        if ((t.nets[pn].not_rail || t.nets[pn].internal) && is_rail(net)) return false;
        if (!t.nets[pn].internal) continue;
        for (const auto& d : n.devices)
          for (const auto& term : d.terminals)
            if (term.role != TerminalRole::B && lower(term.net) == net && !member_names.count(d.name)) return false;
      }
      return true;
    };

    std::function<void(std::size_t)> assign = [&](std::size_t i) {
      if (i == k) {
        if (check()) {
          std::vector<std::string> names;
          for (auto* d : chosen) names.push_back(d->name);
          std::sort(names.begin(), names.end());
          found.insert(names);
        }
        return;
      }
      const DeviceKind want = pattern[i].kind == NodeKind::Nmos ? DeviceKind::Nmos : DeviceKind::Pmos;
      for (std::size_t c = 0; c < mos.size(); ++c) {
        if (used[c] || mos[c]->kind != want) continue;
        used[c] = true;
        chosen[i] = mos[c];
        assign(i + 1);
        used[c] = false;
      }
    };
    assign(0);
  }
  return found;
}

ConductionGraph random_conduction_graph(Rng& rng, std::size_t max_vertices) {
  ConductionGraph cg;
  const std::size_t total = 4 + rng.index(max_vertices - 3);
  const std::size_t dev_count = 1 + rng.index(total - 3);
  cg.vertices.push_back({"vdd", false, NetTag::Vdd});
  cg.vertices.push_back({"gnd", false, NetTag::Gnd});
  cg.vdd = 0;
  cg.gnd = 1;
  const std::size_t nets = total - 2 - dev_count;
  for (std::size_t i = 0; i < nets; ++i) cg.vertices.push_back({"n" + std::to_string(i), false, NetTag::Net});
  std::vector<std::size_t> net_ids{0, 1};
  for (std::size_t i = 0; i < nets; ++i) net_ids.push_back(2 + i);
  for (std::size_t i = 0; i < dev_count; ++i) {
    const std::size_t id = cg.vertices.size();
    cg.vertices.push_back({"D" + std::to_string(i), true, NetTag::Net});
    auto pool = net_ids;
    rng.shuffle(pool);
    const std::size_t degree = std::min<std::size_t>(pool.size(), 1 + rng.index(3));
    for (std::size_t j = 0; j < degree; ++j)
      cg.links.push_back({id, pool[j], j == 0 ? EdgeLabel::D : j == 1 ? EdgeLabel::S : EdgeLabel::R});
  }
  cg.index();
  return cg;
}

std::set<std::vector<std::string>> naive_paths(const ConductionGraph& cg) {
  std::vector<std::set<std::size_t>> adj(cg.vertices.size());
  for (const auto& l : cg.links) {
    adj[l.device].insert(l.net);
    adj[l.net].insert(l.device);
  }
  std::set<std::vector<std::string>> out;
  std::vector<std::size_t> path{*cg.vdd};
  std::function<void(std::size_t)> walk = [&](std::size_t v) {
    for (auto w : adj[v]) {
      if (std::find(path.begin(), path.end(), w) != path.end()) continue;
      path.push_back(w);
      if (w == *cg.gnd) {
        std::vector<std::string> labels;
        for (auto x : path) labels.push_back(cg.vertices[x].label);
        out.insert(labels);
      } else {
        walk(w);
      }
      path.pop_back();
    }
  };
  walk(*cg.vdd);
  return out;
}

std::set<std::set<std::string>> closure_partition(const ConductionGraph& cg,
                                                  const std::set<std::vector<std::string>>& paths) {
  const std::string vdd = cg.vertices[*cg.vdd].label, gnd = cg.vertices[*cg.gnd].label;
  std::vector<std::set<std::string>> classes;
  for (const auto& p : paths) {
    std::set<std::string> s;
    for (const auto& v : p)
      if (v != vdd && v != gnd) s.insert(v);
    classes.push_back(s);
  }
  bool merged = true;
  while (merged) {
    merged = false;
    for (std::size_t i = 0; i < classes.size() && !merged; ++i)
      for (std::size_t j = i + 1; j < classes.size() && !merged; ++j) {
        const bool share = std::any_of(classes[i].begin(), classes[i].end(),
                                       [&](const std::string& v) { return classes[j].count(v) > 0; });
        if (share) {
          classes[i].insert(classes[j].begin(), classes[j].end());
          classes.erase(classes.begin() + static_cast<std::ptrdiff_t>(j));
          merged = true;
        }
      }
  }
  return {classes.begin(), classes.end()};
}

double ref_score(double f, double c, int phi) {
  const double denom = std::max(std::fabs(f), std::fabs(c));
  if (denom == 0.0) return 0.0;
  return phi * (f - c) / denom;
}

double ref_fom_feasibility(const std::vector<double>& f, const std::vector<double>& c, const std::vector<int>& phi) {
  double fom = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) fom += std::min(0.0, ref_score(f[i], c[i], phi[i]));
  return fom;
}

double ref_fom_single(const std::vector<double>& f, const std::vector<double>& c, const std::vector<int>& phi,
                      std::size_t target) {
  double penalty = 0.0;
  bool others_met = true;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (i == target) continue;
    const double r = ref_score(f[i], c[i], phi[i]);
    penalty += std::min(0.0, r);
    if (r < 0) others_met = false;
  }
  const double rt = ref_score(f[target], c[target], phi[target]);
  return penalty + (others_met ? rt : std::min(0.0, rt));
}

}  // namespace oracle
