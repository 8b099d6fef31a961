//! Fixed text of the persuasion prompt.

/// Role-play instructions shared by every prompt.
pub(crate) const SELF_AWARENESS: &str = r#"## Self-Awareness

You are a self-interested rational player. 
- "Self-interested" means that you only care your own utilitarian payoffs, without necessarily considering the welfare of others. Even though sometimes you design your strategy depending on the other party's utility function, your ultimate goal is still to optimize your own expected payoffs.
- "Rational" means that you will always choose the strategy that brings you a higher expected payoff. That is, given any two strategies A and B, if strategy A provides a higher expected payoff than strategy B, you will always choose strategy A over strategy B. Even if A brings only a small improvement.
- Therefore, when making decisions, you need to compare and ensure that this strategy brings a higher expected payoff than any other strategy you could choose.

"#;

pub(crate) const PERSUASION_INTRO: &str = r#"## Task Description

Apart from you, there is another self-interested rational player, and you two are going to play a game. One player acts as the sender while the other player acts as the receiver. Both parties strive to maximize their own rewards.

### Task Scenario

"#;

pub(crate) const MATH_BLURB: &str = r#"This is a purely mathematical problem, with no real-world context necessary. Our focus is solely on the abstract properties of numbers and structures.
"#;

pub(crate) const STRATEGY_SPACES: &str = r#"- The sender is to decide a signaling scheme $varphi: S to Delta(Sigma)$, where $S$ is the environmental state space, $Sigma$ is the sender's signal space, and $Delta(Sigma) is the set of all random variables on $Sigma$.
- The receiver is to decide an action rule $pi: Sigma to Delta(A)$, where $Sigma$ is the sender's signal space, $A$ is the receiver's action space, and $Delta(A) is the set of all random variables on $A$.

### Reward Function

"#;

/// Expected payoffs written out in the binary parameters.
pub(crate) const BINARY_PAYOFFS: &str = r#"
Let x1, x2, y1 and y2 represent
- $varphi(sigma=1 | s=0)$ (the probability of the sender sending signal 1 when the state is 0),
- $varphi(sigma=1 | s=1)$ (the probability of the sender sending signal 1 when the state is 1),
- $pi(a=1 | sigma=0)$ (the probability of the receiver taking action 1 when the signal is 0), and
- $pi(a=1 | sigma=1)$ (the probability of the receiver taking action 1 when the signal is 1), respectively
Then,
- The sender's expected payoff is:
    E(r^i) = 
        mu_0(s=0) * (1-x1) * (1-y1) * r^i(s=0, a=0)
        + mu_0(s=0) * (1-x1) * y1 * r^i(s=0, a=1)
        + mu_0(s=0) * x1 * (1-y2) * r^i(s=0, a=0)
        + mu_0(s=0) * x1 * y2 * r^i(s=0, a=1)
        + mu_0(s=1) * (1-x2) * (1-y1) * r^i(s=1, a=0)
        + mu_0(s=1) * (1-x2) * y1 * r^i(s=1, a=1)
        + mu_0(s=1) * x2 * (1-y2) * r^i(s=1, a=0)
        + mu_0(s=1) * x2 * y2 * r^i(s=1, a=1)

- The receiver's expected payoff is: 
    E(r^j) = 
        mu_0(s=0) * (1-x1) * (1-y1) * r^j(s=0, a=0)
        + mu_0(s=0) * (1-x1) * y1 * r^j(s=0, a=1)
        + mu_0(s=0) * x1 * (1-y2) * r^j(s=0, a=0)
        + mu_0(s=0) * x1 * y2 * r^j(s=0, a=1)
        + mu_0(s=1) * (1-x2) * (1-y1) * r^j(s=1, a=0)
        + mu_0(s=1) * (1-x2) * y1 * r^j(s=1, a=1)
        + mu_0(s=1) * x2 * (1-y2) * r^j(s=1, a=0)
        + mu_0(s=1) * x2 * y2 * r^j(s=1, a=1)
"#;

pub(crate) const PROCEDURE_INTRO: &str = r#"
### Task Procedure

The procedure of this task is as follows:

- If the sender is the proposer (and the receiver is the responder):
    - The sender determines a signaling scheme $varphi$ and commits it to the receiver. $varphi: S to Delta(Sigma)$, where $S$ is the environmental state space, $Sigma$ is the sender's signal space, and $Delta(Sigma) is the set of all random variables on $Sigma$.
    - The receiver decides an action rule: 
        - $pi_0$: The receiver ignores the sender's signals and chooses the best response to the prior belief at each time in the sample phase.
        - $pi_1$: The receiver calculates its posterior belief (using prior belief, the sender's signaling scheme, and every sent signal in the sample phase), and chooses the best response to the posterior belief.
        - $pi$: A different action rule apart from the two mentioned above. $pi: Sigma to Delta(A)$, where $Sigma$ is the sender's signal space, $A$ is the receiver's action space, and $Delta(A) is the set of all random variables on $A$.
- If the receiver is the proposer (and the sender is the responder):
        - The receiver announces a signaling scheme $varphi_1$, claiming that it will follow $pi_1$ if the sender commits to a signaling scheme $varphi$ that yields an expected reward for the receiver at least as high as that induced by $varphi_1$; otherwise, the receiver will follow $pi_0$.
        - The sender determines a signaling scheme $varphi$

The procedure is as follows:
"#;

pub(crate) const LOOP_BODY: &str = r#"2. The following process continues until one of three conditions is met: either a consensus is reached (the receiver decides $pi_1$ as a responder or the sender decides a a signaling scheme $varphi$ that yields an expected reward for the receiver at least as high as that induced by $varphi_1$) or the game ends due to a timeout:
    3. The proposer decides its policy
        - If the sender is the proposer: The sender determines a signaling scheme $varphi$ and commits it to the receiver. $varphi: S to Delta(Sigma)$, where $S$ is the environmental state space, $Sigma$ is the sender's signal space, and $Delta(Sigma) is the set of all random variables on $Sigma$.
        - If the receiver is the proposer: The receiver announces a signaling scheme $varphi_1$, claiming that it will follow $pi_1$ if the sender commits to a signaling scheme $varphi$ that yields an expected reward for the receiver at least as high as that induced by $varphi_1$; otherwise, the receiver will follow $pi_0$.
    4. The responder decides its policy
        - If the receiver is the responder: The receiver decides an action rule
        - If the sender is the responder: The sender determines a signaling scheme $varphi$
"#;

pub(crate) const SWITCH_ROLES: &str = r#"    5. If they did not reach a consensus, the two agents switch roles: the current responder becomes the proposer, and the current proposer becomes the responder.
"#;

pub(crate) const SIMULATION: &str = r#"Next, a simulation takes place where the players do not make any new decisions. The environment samples $n$ states, and the players act according to their predefined policies, receiving their corresponding rewards.
1. The following process continues until $n$ states are sampled:
    2. The environment samples a state $s$ according to the prior state distribution $mu_0$.
    3. The sender signals $sigma$ based on the committed signaling scheme $varphi$.
    4. The receiver selects an action $a$ according to the decided action rule $pi$.
    5. Each agent receives a reward based on the sampled state $s$ and the action $a$ taken by the receiver.

Note that:
"#;

pub(crate) const BINARY_FORMAT: &str = r#"

### Format

#### If You Are the Proposer
Format the output in JSON according to the following template:
If you are the sender:
{
    "Analysis": "(Your Summarized Analysis)", 
    "Decision": [x1, x2],
}
where:
- x1 represents $varphi(sigma=1 | s=0)$: the probability of sending signal 1 when the state is 0.
- x2 represents $varphi(sigma=1 | s=1)$: the probability of sending signal 1 when the state is 1.
- If you are the sender, this decision specifies your signaling scheme.
- If you are the receiver, this decision specifies the signaling scheme $varphi_1$ you expect the sender to take, claiming that you will follow $pi_1$ if the sender commits to a signaling scheme $varphi$ that yields an expected reward for the receiver at least as high as that induced by $varphi_1$; otherwise, the receiver will follow $pi_0$.

#### If You Are the Responder
Format the output in JSON according to the following template:
{
    "Analysis": "(Your Summarized Analysis)", 
    "Decision": [y1, y2],
}
If you are the receiver:
    - y1 represents $pi(a=1 | sigma=0)$: the probability of taking action 1 when the signal is 0.
    - y2 represents $pi(a=1 | sigma=1)$: the probability of taking action 1 when the signal is 1.
    - This decision specifies your action rule.
If you are the sender:
    - x1 represents $varphi(sigma=1 | s=0)$: the probability of sending signal 1 when the state is 0.
    - x2 represents $varphi(sigma=1 | s=1)$: the probability of sending signal 1 when the state is 1.
    - This decision specifies your signaling scheme. You can make it the same as the receiver proposed or any othor signaling scheme.

Please STRICTLY adhere to the JSON templates when outputting, and do not output anything else. Please think step by step, and then make a decision based on all the information you know. Remember that you and your opponents are both self-interested rational players. Be aware of the consequences of your decisions. Your analysis and decisions should remain logically CONSISTENT.

## Identity

"#;
