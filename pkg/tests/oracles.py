"""Independent reference computations used to freeze expected values.

These deliberately do not import the package's physics code.
"""

import math


def link_probability(length_km, att=0.2, eta_c=0.8, eta_d=0.8, bsa=0.5):
    # each photon travels half the link to the midpoint analyser
    arm = 10 ** (-(att * length_km / 2) / 10) * eta_c * eta_d
    return bsa * arm * arm


def coincidence(link_km, window_ps=1000.0, dispersion_ps_per_km=25.0):
    # arrival-time difference of two photons, each spread by dispersion * half length
    sigma = dispersion_ps_per_km * link_km / 2
    diff_sigma = math.sqrt(2) * sigma
    return math.erf((window_ps / 2) / (diff_sigma * math.sqrt(2)))


# Busy time (seconds) of each rule's success path under 1 us per quantum op
# and 10 us per message op, counted by hand from the compiled templates.
US = 1e-6
COST = {
    "generate": 2 * US + 10 * US,      # GENERATE, REGISTER | SEND_READY
    "swap": 8 * US + 4 * 10 * US,      # 2 GET, CNOT, H, 2 MEASURE, 2 FREE | 4 sends
    "relabel": 2 * US + 10 * US,       # GET, REGISTER | WAIT
    "correct": 3 * US + 10 * US,       # GET, APPLY, REGISTER | WAIT
    "bell": 8 * US + 10 * US,          # 2 GET, CNOT, H, 2 MEASURE, 2 FREE | SEND_RESULT
    "apply_frame": 3 * US + 10 * US,   # GET, APPLY, FREE | WAIT
    "prepare": 1 * US,
}


def single_pair_time(setup, link_delay):
    """1 shot x 1 resource with p = 1 and equal links.

    herald after one period (= link delay); repeater stores both halves and
    swaps; ends relabel and correct; client measures; the outcome crosses
    both links; server applies the frame.
    """
    t = setup + link_delay
    t += 2 * COST["generate"] + COST["swap"]      # repeater busy until the swap messages leave
    t += link_delay                                # swap result reaches both ends
    t += COST["relabel"] + COST["correct"] + COST["bell"]
    t += 2 * link_delay                            # outcome travels client -> server
    t += COST["apply_frame"]
    return t
