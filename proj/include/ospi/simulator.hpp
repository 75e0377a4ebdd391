#pragma once

#include <memory>
#include <random>

#include "ospi/mdp.hpp"

namespace ospi {

using Rng = std::mt19937_64;

struct Outcome {
    State next;
    double reward;
};

/// Generative model: samples (next state, reward) for a state-action pair.
class Simulator {
public:
    virtual ~Simulator() = default;

    virtual int num_actions() const = 0;
    virtual double discount() const = 0;
    /// Declared reward range; every sampled reward lies inside it.
    virtual double reward_min() const = 0;
    virtual double reward_max() const = 0;
    virtual Outcome sample(State s, Action a, Rng& rng) const = 0;
};

/// Simulator backed by a tabular model.
class MdpSimulator final : public Simulator {
public:
    explicit MdpSimulator(std::shared_ptr<const Mdp> mdp);
    explicit MdpSimulator(Mdp mdp) : MdpSimulator(std::make_shared<const Mdp>(std::move(mdp))) {}

    int num_actions() const override { return mdp_->num_actions(); }
    double discount() const override { return mdp_->discount(); }
    double reward_min() const override { return mdp_->reward_min(); }
    double reward_max() const override { return mdp_->reward_max(); }
    Outcome sample(State s, Action a, Rng& rng) const override;

    const Mdp& mdp() const { return *mdp_; }

private:
    std::shared_ptr<const Mdp> mdp_;
};

}  // namespace ospi
