# Benchmark Graph
#
# This module sets up the LangGraph workflow that builds the planted-activity corpus.
#
# Workflow:
# 1. Generate (classes, raw videos with one or more segments)
# 2. Curate (merge same-label overlaps, one video per segment, length filter)
# 3. Queries (simple and difficult image queries per video)
# 4. Split (class-disjoint train/valid/test + manifest)

from typing import Any, Dict

from langgraph.graph import StateGraph, END

from config import BenchConfig
from logging_config import get_logger
from state import BenchState

from databench.generator import create_generate_node
from databench.curation import create_curate_node
from databench.queries import create_queries_node
from databench.splits import create_split_node

logger = get_logger("BenchmarkGraph")

NODE_ORDER = ("generate", "curate", "queries", "split")


class BenchmarkGraph:
    """
    Linear workflow:
    START → generate → curate → queries → split → END

    Each node reads from the shared state, does one pipeline stage and writes
    its outputs back. All randomness is derived from the `seed` in the state.
    """

    def __init__(self, cfg: BenchConfig = None, debug: bool = False):
        """
        Args:
            cfg: generator settings (defaults to BenchConfig())
            debug: stream node-by-node progress to the log
        """
        self.cfg = cfg or BenchConfig()
        self.debug = debug
        self.graph = self._build_graph()

    def _build_graph(self):
        workflow = StateGraph(BenchState)

        workflow.add_node("generate", create_generate_node(self.cfg))
        workflow.add_node("curate", create_curate_node(self.cfg.min_len, self.cfg.max_len))
        workflow.add_node("queries", create_queries_node(self.cfg))
        workflow.add_node("split", create_split_node(self.cfg.split_ratios))

        workflow.set_entry_point("generate")
        workflow.add_edge("generate", "curate")
        workflow.add_edge("curate", "queries")
        workflow.add_edge("queries", "split")
        workflow.add_edge("split", END)

        compiled_graph = workflow.compile()
        if self.debug:
            logger.debug("graph compiled: " + " → ".join(NODE_ORDER))
        return compiled_graph

    def run(self, seed: int) -> Dict[str, Any]:
        """
        Build the corpus for one seed.

        Returns:
            Final state with corpus, curated, samples, skipped_videos, train, valid, test, manifest
        """
        initial_state: BenchState = {"seed": seed}

        if not self.debug:
            return {**initial_state, **self.graph.invoke(initial_state)}

        final_state: Dict[str, Any] = dict(initial_state)
        for step_num, output in enumerate(self.graph.stream(initial_state), 1):
            node_name = list(output.keys())[0]
            update = output[node_name] or {}
            logger.debug(f"step {step_num}: {node_name} wrote {', '.join(sorted(update))}")
            final_state.update(update)
        return final_state


def create_benchmark_graph(cfg: BenchConfig = None, debug: bool = False) -> BenchmarkGraph:
    return BenchmarkGraph(cfg, debug)
