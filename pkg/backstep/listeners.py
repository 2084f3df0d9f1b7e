# -*- coding: utf-8 -*-
import abc

__all__ = ['SimulationListener']


class SimulationListener(metaclass=abc.ABCMeta):
    """Observer of a time-domain simulation. Every hook is a no-op by default."""

    def on_simulation_started(self, simulation, state):
        """
        Called once, before the first step, with the initial state

        :param simulation: The running simulation
        :type simulation: :class:`backstep.simulation.Simulation`
        :param state: The initial state
        """

    def on_step(self, simulation, state):
        """
        Called after every time step

        :param simulation: The running simulation
        :param state: The state after the step
        """

    def on_recorded(self, simulation, state):
        """
        Called whenever a snapshot is recorded, i.e. at the recording cadence and at the final time

        :param simulation: The running simulation
        :param state: The recorded state
        """

    def on_simulation_finished(self, simulation, state):
        """
        Called once when the horizon has been reached

        :param simulation: The running simulation
        :param state: The final state
        """
