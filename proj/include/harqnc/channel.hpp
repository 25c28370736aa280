#pragma once

#include "harqnc/model.hpp"
#include "harqnc/rng.hpp"

#include <optional>

namespace harqnc {

/// Protocol state of the HARQ link at time k.
struct LinkState {
  int tau = 0;    // steps since the last TX when the previous attempt failed, else 0
  int omega = 0;  // attempts already spent on the pending packet (always equal to tau)
  int fading_state = 0;
  std::optional<Decision> last_u;
  std::optional<int> last_gamma;
  int k = 0;
};

/// Channel output z_k: either the delivered estimate with its origin time or an erasure.
struct ChannelOutput {
  enum class Status { Delivered, Erased };

  Status status = Status::Erased;
  std::optional<Vector> payload;
  int origin = -1;

  static ChannelOutput erased() { return {}; }
  static ChannelOutput delivered(Vector x, int origin_time) {
    return {Status::Delivered, std::move(x), origin_time};
  }
  bool is_delivered() const { return status == Status::Delivered; }
};

/// tau recursion: 1 after a failed TX, tau+1 after a failed RTX, 0 otherwise.
int next_tau(int tau, Decision u, int gamma);

LinkState initial_link(const ChannelSpec& spec);

/// lambda(0) of the current fading state for TX, lambda(omega) for RTX.
/// Throws ProtocolError for RTX with nothing pending (tau = 0).
double error_rate(const ChannelSpec& spec, const LinkState& link, Decision u);

/// One Markov transition of the fading chain using a single uniform draw.
int step_fading(const ChannelSpec& spec, int state, Rng& rng);

struct Transmission {
  ChannelOutput z;  // z_{k+1}
  int gamma = 0;    // gamma_k
  double lambda = 0.0;
  LinkState next;   // link at k+1
};

/// Packet-erasure channel with ideal acknowledgments. The channel keeps the
/// last failed payload itself and serves it on RTX, so the caller only hands
/// over a payload on TX.
class Channel {
 public:
  explicit Channel(const ChannelSpec& spec);

  const LinkState& link() const { return link_; }
  const ChannelSpec& spec() const { return *spec_; }
  int pending_origin() const { return pending_origin_; }

  /// Samples gamma_k ~ Bernoulli(1 - lambda) from the erasure stream and advances.
  Transmission transmit(Decision u, const Vector& fresh_payload, Rng& erasure_rng, Rng& fading_rng);

  /// Same as transmit with gamma_k given.
  Transmission transmit_with_outcome(Decision u, const Vector& fresh_payload, int gamma,
                                     Rng& fading_rng);

 private:
  const ChannelSpec* spec_;
  LinkState link_;
  Vector pending_;
  int pending_origin_ = -1;
};

}  // namespace harqnc
