from sqlalchemy import Column, Integer, String, Float, ForeignKey, DateTime, Text, CheckConstraint
from sqlalchemy.orm import relationship, declarative_base
from datetime import datetime

"""
Author: Imran Mughal
Email: imran@mughal.com
Date: October 18, 2026
"""

Base = declarative_base()

class Run(Base):
    __tablename__ = 'runs'

    run_id = Column(Integer, primary_key=True, autoincrement=True)
    command = Column(String, nullable=False)
    config_hash = Column(String, nullable=False, default='')
    loss = Column(String)
    seed = Column(Integer)
    output_dir = Column(String)
    accuracy = Column(Float)
    ece = Column(Float)
    aece = Column(Float)
    nll = Column(Float)
    temperature = Column(Float)
    details = Column(Text)
    created_at = Column(DateTime, nullable=False, default=datetime.utcnow)

    # Constraints
    __table_args__ = (
        CheckConstraint(command.in_(['train', 'calibrate', 'sweep-margin', 'compare'])),
    )

    # Relationships
    epochs = relationship('EpochMetric', back_populates='run', cascade='all, delete-orphan',
                          order_by='EpochMetric.epoch')

class EpochMetric(Base):
    __tablename__ = 'epoch_metrics'

    epoch_metric_id = Column(Integer, primary_key=True, autoincrement=True)
    run_id = Column(Integer, ForeignKey('runs.run_id', ondelete='CASCADE'), nullable=False)
    epoch = Column(Integer, nullable=False)
    train_loss = Column(Float)
    val_loss = Column(Float)
    val_acc = Column(Float)
    val_ece = Column(Float)
    learning_rate = Column(Float)

    # Relationships
    run = relationship('Run', back_populates='epochs')
