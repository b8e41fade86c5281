#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cfmdd/beamforming.hpp"
#include "cfmdd/channel.hpp"
#include "cfmdd/config.hpp"

namespace cfmdd {

inline constexpr int kDatasetVersion = 1;

/// A generated network instance. Loaded instances carry only the
/// large-scale gains inside `channels`; the full channel set is recoverable
/// from the seed with draw_channels.
struct Instance {
  std::uint64_t seed = 0;
  Topology topology;
  EquivalentGains gains;
  ChannelSet channels;
};

struct Dataset {
  NetworkConfig config;
  std::vector<Instance> instances;
};

/// Seed of instance `index` of a split with base seed `base`.
std::uint64_t instance_seed(std::uint64_t base, std::size_t index);

Instance make_instance(const NetworkConfig& config, std::uint64_t seed);

/// Instances for the given seeds, generated in parallel; order follows
/// `seeds`.
std::vector<Instance> generate_instances(const NetworkConfig& config,
                                         const std::vector<std::uint64_t>& seeds);
std::vector<Instance> generate_instances_serial(const NetworkConfig& config,
                                                const std::vector<std::uint64_t>& seeds);

/// Line-delimited JSON: a header with schema version and configuration, then
/// one record per instance.
std::string dataset_header(const NetworkConfig& config, std::size_t count);
std::string instance_record(const Instance& instance);
void write_dataset(const std::string& path, const NetworkConfig& config,
                   const std::vector<Instance>& instances);
Dataset read_dataset(const std::string& path);
Dataset parse_dataset(const std::string& text);

/// gen-data: `count` instances with seeds instance_seed(base, 0..count-1).
void gen_dataset(const NetworkConfig& config, std::uint64_t base_seed, std::size_t count,
                 const std::string& path);

}  // namespace cfmdd
